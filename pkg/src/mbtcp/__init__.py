"""Model-based test case prioritization: LTS models, DFS test generation,
fourteen prioritization techniques and an APFD experiment harness."""

from .faults import FailureProfile, FaultReport, SuiteSizeClass, classify_suite, inject_failure
from .lts import LtsModel, Transition, login_model, profile, validate
from .prioritizers import TECHNIQUES, PrioritizedOrder, prioritize
from .stats import a12, apfd, kruskal_wallis
from .synth import SynthConfig, synthesize
from .testgen import TestCase, TestSuite, generate, metrics

__version__ = "0.1.0"

__all__ = [
    "FailureProfile", "FaultReport", "SuiteSizeClass", "classify_suite", "inject_failure",
    "LtsModel", "Transition", "login_model", "profile", "validate",
    "TECHNIQUES", "PrioritizedOrder", "prioritize",
    "a12", "apfd", "kruskal_wallis",
    "SynthConfig", "synthesize",
    "TestCase", "TestSuite", "generate", "metrics",
]
