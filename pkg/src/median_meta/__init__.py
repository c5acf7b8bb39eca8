"""Meta-analysis of studies that report medians and quantiles."""

from .abc_density import AbcConfig, AbcResult, abc_effect, abc_fit
from .distributions import FIGURE1_MIXTURE, Family
from .median_methods import (
    FittedDensity,
    MdmResult,
    QEConfig,
    mdm,
    mdm_normal_approx,
    qe_bc_effect,
    qe_effect,
    qe_effects,
    qe_fit,
)
from .pooling import PoolResult, pool, pool_fixed, pool_random
from .shapiro import shapiro_wilk
from .summary_model import (
    GroupSummary,
    MetaDataset,
    Scenario,
    StudyRecord,
    load_tb_fixture,
    parse_csv,
    read_csv,
)
from .transform import EffectEstimate, diff_of_means, luo_mean_sd, wan_mean_sd

__version__ = "0.1.0"

__all__ = [
    "AbcConfig", "AbcResult", "abc_effect", "abc_fit",
    "FIGURE1_MIXTURE", "Family",
    "FittedDensity", "MdmResult", "QEConfig", "mdm", "mdm_normal_approx",
    "qe_bc_effect", "qe_effect", "qe_effects", "qe_fit",
    "PoolResult", "pool", "pool_fixed", "pool_random",
    "shapiro_wilk",
    "GroupSummary", "MetaDataset", "Scenario", "StudyRecord",
    "load_tb_fixture", "parse_csv", "read_csv",
    "EffectEstimate", "diff_of_means", "luo_mean_sd", "wan_mean_sd",
    "__version__",
]
