"""Evaluation toolkit for unpaired MRI-to-CT translation.

Distribution-based similarity scores (Fréchet distance, KL divergence,
histogram correlation and intersection, spectral correlation) computed
per axial layer and normalized against real-vs-real baselines, plus a
blind physician survey workflow with Chi-squared response analysis.
"""

from .errors import (
    DegenerateBaseline,
    DegenerateDistribution,
    DegenerateTable,
    InsufficientSamples,
    InvalidParameter,
    IoError,
    MalformedInput,
    MissingFeature,
    NotPositiveSemidefinite,
    ToolkitError,
    UnsupportedEncoding,
)
from .evaluation import (
    BaselineTable,
    EvalConfig,
    EvaluationReport,
    LayerScore,
    METRICS,
    compute_baseline,
    evaluate_sets,
    export_report,
)
from .frechet import (
    FeatureMatrix,
    GaussianSummary,
    fid_between_sets,
    fit_gaussian,
    frechet_distance,
    load_features,
    save_features,
    sqrt_spd,
)
from .histograms import (
    Histogram,
    TissueBinning,
    average_histogram,
    hist_correlation,
    hist_intersection,
    image_histogram,
    kl_divergence,
    tissue_histogram,
)
from .imaging import (
    ImageSet,
    IngestConfig,
    Modality,
    N_LAYERS,
    SliceImage,
    assign_layers,
    load_dicom_slice,
    load_manifest,
    load_portable_slice,
    save_portable_slice,
    slice_key,
    window_to_8bit,
)
from .spectral import (
    Spectrum,
    average_spectrum,
    fft2d,
    ifft2d,
    save_spectrum,
    spectrum_correlation,
    to_spectrum,
)
from .surveyservice import SurveyDefinition, create_app, make_survey, persist_survey
from .surveystats import (
    ContingencyTable,
    SurveyRecord,
    accuracy_breakdown,
    build_table,
    chi_squared_test,
    comparison_report,
    load_survey_log,
    survey_stats,
)

__version__ = "0.1.0"
