from emdenflow.continuous import f0, f_eval, g_eval, solve_U  # NOQA
from emdenflow.critical import critical_report, crossings, solve_kc, solve_t0  # NOQA
from emdenflow.discrete import recursion_trace  # NOQA
from emdenflow.shooting import solve_w  # NOQA

__version__ = "0.1.0"
