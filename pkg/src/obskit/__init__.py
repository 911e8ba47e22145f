"""Structural observability, identifiability and input reconstructibility of ODE models."""
from obskit.algorithms import (
    AnalysisOptions,
    Report,
    Termination,
    Verdict,
    analyze,
    classify_variables,
    run_fispo,
    run_orcdf,
)
from obskit.model import (
    Model,
    NotAffine,
    affine_decompose,
    augment,
    parse_model,
    replicate_for_experiments,
    with_bounds,
)
from obskit.parsing import ParseError
from obskit.rank import DegenerateEvaluation, RankConfig, generic_rank

__version__ = "0.1.0"

__all__ = [
    "AnalysisOptions",
    "DegenerateEvaluation",
    "Model",
    "NotAffine",
    "ParseError",
    "RankConfig",
    "Report",
    "Termination",
    "Verdict",
    "affine_decompose",
    "analyze",
    "augment",
    "classify_variables",
    "generic_rank",
    "load_fixture",
    "parse_model",
    "replicate_for_experiments",
    "run_fispo",
    "run_orcdf",
    "with_bounds",
]


def load_fixture(name: str) -> Model:
    """One of the bundled case-study models, e.g. ``load_fixture("c2m")``."""
    from importlib.resources import files

    text = files("obskit").joinpath("models", f"{name}.txt").read_text(encoding="utf-8")
    return parse_model(text, name)
