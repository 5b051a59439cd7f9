from .config import DEFAULT_EPS, Branch, ClusterSpace, ConfigError, Mode, RunConfig
from .run import STAGES, PipelineError, RunManifest, Runner, report, run, sha256_file
