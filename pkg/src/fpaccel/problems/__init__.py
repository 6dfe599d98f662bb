from .interval import (
    IntervalCensorData,
    ZeroRowMass,
    gen_interval_censor,
    ic_em_map,
    ic_feasible,
    ic_loglik,
    ic_problem,
    incidence_matrix,
)
from .io import dump_dataset, load_dataset
from .mvt import (
    MvtData,
    SigmaNotPD,
    gen_mvt,
    mvt_em_map,
    mvt_feasible,
    mvt_loglik,
    mvt_problem,
    mvt_px_em_map,
)
from .probit import ProbitData, gen_probit, inverse_mills, probit_em_map, probit_loglik, probit_problem
from .rng import make_rng

__all__ = [
    "IntervalCensorData", "ZeroRowMass", "gen_interval_censor", "ic_em_map", "ic_feasible",
    "ic_loglik", "ic_problem", "incidence_matrix", "dump_dataset", "load_dataset", "MvtData",
    "SigmaNotPD", "gen_mvt", "mvt_em_map", "mvt_feasible", "mvt_loglik", "mvt_problem",
    "mvt_px_em_map", "ProbitData", "gen_probit", "inverse_mills", "probit_em_map",
    "probit_loglik", "probit_problem", "make_rng",
]
