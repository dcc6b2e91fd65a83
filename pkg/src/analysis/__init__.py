from .flops import (
    FlopReport,
    NetworkFlops,
    count_network_flops,
    count_routing_flops,
    overhead_sweep,
)
from .gradcheck import GradcheckReport, gradcheck, parameter_group, relative_error
from .histograms import (
    HISTOGRAM_COLUMNS,
    ActivationHistogram,
    activation_histograms,
    jensen_shannon,
    mean_pairwise_js,
    write_histogram_csv,
)
from .probe import ProbeDataset, ProbeResult, collect_probe_features, linear_probe
from .reports import flops_report, histogram_report, probe_report, write_json_report

__all__ = [
    "HISTOGRAM_COLUMNS",
    "ActivationHistogram",
    "FlopReport",
    "GradcheckReport",
    "NetworkFlops",
    "ProbeDataset",
    "ProbeResult",
    "activation_histograms",
    "collect_probe_features",
    "count_network_flops",
    "count_routing_flops",
    "flops_report",
    "gradcheck",
    "histogram_report",
    "jensen_shannon",
    "linear_probe",
    "mean_pairwise_js",
    "overhead_sweep",
    "parameter_group",
    "probe_report",
    "relative_error",
    "write_histogram_csv",
    "write_json_report",
]
