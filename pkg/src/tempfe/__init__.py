"""Temperature-bin fixed-effects panel regressions.

Daily weather is binned into annual day counts, joined to firm-year
outcomes, and regressed with absorbed firm and year effects and classical
or city-clustered standard errors.
"""

from .errors import (ConvergenceError, DofExhaustedError, EmptySampleError, EstimationError,
                     InsufficientClustersError, RankError, SchemaError, TempFEError, ValidationError)
from .tembin import BinCounts, BinSpec, FeatureMatrix, bin_index, build_features, build_lagged, count_bins
from .paneldata import (DailyWeatherRecord, FirmYearRecord, JoinReport, Ownership, PanelDataset,
                        convert_gsod_units, join_firm_weather, parse_firm_csv, parse_weather_csv)
from .hdfe import AbsorptionResult, FESpec, absorb, count_absorbed_dof, drop_singletons, within_transform
from .estimator import (Estimate, FitResult, RegressionSpec, classical_vcov, cluster_vcov, fit, ols,
                        summarize_fit)
from .coefplot import CoefPlotArtifact, emit_coefplot
from .study import (StudyConfig, TableArtifact, run_baseline, run_descriptives, run_industry_het,
                    run_ownership_het, run_pipeline, run_robustness)
from .synth import SynthScenario, SynthTruth, generate_panel, oracle_ols_dummies

__version__ = "0.1.0"
