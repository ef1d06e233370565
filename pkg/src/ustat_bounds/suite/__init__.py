from .cases import CASES, ApplicabilityError, Evaluation, InequalityCase, get_case
from .corpus import build_class_corpus, build_corpus
from .engine import (FitResult, SuiteResult, VerificationReport, check_inequality, fit_constant,
                     minimal_constant, run_suite, summarize, write_reports)
