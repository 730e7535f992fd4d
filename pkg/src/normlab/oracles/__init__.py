"""Independent reference implementations and checkers for the engine."""
from .gradcheck import gradcheck
from .reference import (oracle_bn, oracle_conv2d, oracle_iebn, oracle_iebn_gate, oracle_in,
                        oracle_se, oracle_se_gate)
from .report import OracleReport, compare, reports_to_csv
from .suites import (conv_equivalence_suite, eval_equivalence_suite, gradcheck_suite,
                     identity_suite, init_equivalence_reports, oracle_equivalence_suite, run_all)

__all__ = [
    "OracleReport", "compare", "reports_to_csv", "gradcheck", "oracle_bn", "oracle_in",
    "oracle_se", "oracle_se_gate", "oracle_iebn", "oracle_iebn_gate", "oracle_conv2d",
    "oracle_equivalence_suite", "eval_equivalence_suite", "conv_equivalence_suite",
    "init_equivalence_reports", "gradcheck_suite", "identity_suite", "run_all",
]
