"""Word lists for the bundled tagger.

Closed-class words never become UML elements; the open-class lists only need to
cover words whose tag cannot be guessed by the default-to-noun rule.
"""

DETERMINERS = frozenset(
    """
    a an the any each every all some no this that these those its their his her our your my
    another either neither both several many much few such what which whose
    """.split()
)

PREPOSITIONS = frozenset(
    """
    of on in at to for with by from into onto than between within without under over per
    about after before during through among against along across toward towards upon via
    """.split()
)

CONJUNCTIONS = frozenset(
    """
    and or but nor if then else when whenever while unless whether so because although
    though once until where
    """.split()
)

PRONOUNS = frozenset(
    """
    it they he she we you i them him us me who whom there itself themselves himself herself
    one ones someone anyone everyone nobody something anything everything nothing
    """.split()
)

ADVERBS = frozenset(
    """
    not never always only also at least most more less very too just already still even
    exactly either otherwise however else ever n't
    """.split()
)

MODALS = frozenset("must may might can could should shall will would cannot".split())

NUMBER_WORDS = frozenset(
    """
    zero one two three four five six seven eight nine ten eleven twelve thirteen fourteen
    fifteen sixteen seventeen eighteen nineteen twenty thirty forty fifty sixty seventy
    eighty ninety hundred thousand million billion
    """.split()
)

CLOSED_CLASS = DETERMINERS | PREPOSITIONS | CONJUNCTIONS | PRONOUNS | ADVERBS | MODALS | NUMBER_WORDS

ADJECTIVES = frozenset(
    """
    maximum minimum valid invalid unique positive negative total same different new old
    active inactive male female current first last empty full greater smaller larger higher
    lower equal possible available young older younger non-negative nonnegative mandatory
    optional distinct whole entire average annual monthly daily single multiple final
    initial previous next open closed free public private own certain other
    """.split()
)

# lemmas of base verbs; inflected forms are reduced to these by the suffix rules
VERBS = frozenset(
    """
    be have do exceed contain own belong hold earn burn enroll register participate depart
    arrive deliver operate equal match include exclude need require allow make get give
    take use receive pay spend issue return print check ensure start end expire follow
    refer assign exist become remain keep provide offer serve fly book cancel manage work
    employ lead store record link associate relate define specify state indicate mean
    increase decrease reach fall lie occur precede succeed buy sell charge accept reject
    apply collect consist create delete update add remove change cover
    """.split()
)

IRREGULAR_VERBS = {
    "is": "be", "are": "be", "was": "be", "were": "be", "been": "be", "being": "be", "am": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "made": "make", "got": "get", "gotten": "get", "gave": "give", "given": "give",
    "took": "take", "taken": "take", "paid": "pay", "spent": "spend", "held": "hold",
    "kept": "keep", "flew": "fly", "flown": "fly", "flies": "fly", "bought": "buy",
    "sold": "sell", "led": "lead", "fell": "fall", "fallen": "fall", "became": "become",
    "meant": "mean", "lay": "lie", "lain": "lie",
}

IRREGULAR_NOUNS = {
    "people": "person", "children": "child", "men": "man", "women": "woman", "feet": "foot",
    "teeth": "tooth", "mice": "mouse", "data": "data", "criteria": "criterion",
    "indices": "index", "analyses": "analysis", "statuses": "status", "buses": "bus",
    "series": "series", "species": "species", "heroes": "hero", "potatoes": "potato",
    "lives": "life", "wives": "wife", "knives": "knife", "leaves": "leaf", "halves": "half",
    "movies": "movie", "cookies": "cookie", "calories": "calorie", "zombies": "zombie", "rookies": "rookie",
    "selfies": "selfie", "freebies": "freebie", "prairies": "prairie", "brownies": "brownie", "goalies": "goalie",
}

IRREGULAR_ADJECTIVES = {"better": "good", "best": "good", "worse": "bad", "worst": "bad"}

# words that end in "s" in their base form
UNCOUNTED_S = frozenset(
    "status address class business process access series species news bus gas plus bonus "
    "canvas alias atlas basis axis thesis analysis chassis".split()
)
