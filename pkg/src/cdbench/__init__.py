"""Benchmark harness for graph community-detection algorithms.

Core pieces: the graph data model and dataset statistics, four clustering
quality metrics, multi-seed rank concordance (Kendall's W based), a
multi-objective Tree Parzen Estimator for hyperparameter search, a
subprocess runner protocol with builtin baselines, and an orchestrator that
assembles everything into a reproducible results cube.
"""

from .concordance import (
    ComparisonReport,
    ConcordanceReport,
    FailReason,
    ResultsCube,
    TestPoint,
    framework_comparison_rank,
    kendall_w,
    rank_within_seed,
    w_randomness_coefficient,
)
from .graphs import (
    DatasetSummary,
    Graph,
    NodeSplits,
    avg_clustering_coefficient,
    dataset_summary,
    load_dataset,
    make_graph,
    mean_closeness_centrality,
    split_nodes,
)
from .hpo import (
    SearchSpace,
    StudyState,
    TpeConfig,
    Trial,
    categorical,
    int_uniform,
    log_uniform,
    nondominated_split,
    run_study,
    select_best,
    suggest,
    uniform,
)
from .metrics import (
    MetricId,
    MetricValue,
    Partition,
    conductance,
    evaluate_all,
    macro_f1,
    modularity,
    nmi,
)
from .orchestrator import (
    BenchmarkConfig,
    ResourceConfig,
    compare_cubes,
    compare_regimes,
    run_benchmark,
)
from .runner import (
    RunnerSpec,
    TrainRequest,
    TrainResponse,
    builtin_baselines,
    external_spec,
    train_and_predict,
    validate_runner,
)
from .store import cube_from_csv, emit_report, load_cube, save_cube

__version__ = "0.1.0"
