"""Simple profiling harness for path enumeration and ranking on the bundled models."""
import cProfile
import pstats
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT))

from common.models import Metric  # noqa: E402
from services.model.loader import load_model  # noqa: E402
from services.nlp.preprocess import extract_uml_elements, load_specs, preprocess  # noqa: E402
from services.pathgen.graph import build_graph, default_max_len, enumerate_simple_paths  # noqa: E402
from services.rank.similarity import rank_paths  # noqa: E402

FIXTURES = ROOT / "fixtures"


def exercise_ranking(name: str = "royal_loyal") -> None:
    model = load_model(FIXTURES / f"{name}.model.json")
    graph = build_graph(model)
    paths = enumerate_simple_paths(graph, default_max_len(graph))
    for spec in load_specs(FIXTURES / f"{name}.specs.jsonl"):
        elements = extract_uml_elements(preprocess(spec.text))
        rank_paths(model, paths, elements, Metric.JACCARD, 10)
        rank_paths(model, paths, elements, Metric.COSINE, 10)


def main() -> None:
    profile_path = Path(__file__).with_name("ranking_profile.prof")
    with cProfile.Profile() as profiler:
        exercise_ranking()
    profiler.dump_stats(profile_path)
    stats = pstats.Stats(str(profile_path))
    stats.sort_stats(pstats.SortKey.TIME).print_stats(10)


if __name__ == "__main__":
    main()
