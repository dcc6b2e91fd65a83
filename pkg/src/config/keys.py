# sections
NETWORK_SECTION = "network"
TRAIN_SECTION = "train"
DATA_SECTION = "data"
OUTPUT_DIR_KEY = "output_dir"
CONFIG_SECTIONS = (NETWORK_SECTION, TRAIN_SECTION, DATA_SECTION)

# overrides used by presets
NETWORK_NUM_EXPERTS_KEY = "network.num_experts"
NETWORK_TOP_K_KEY = "network.top_k"
TRAIN_SEED_KEY = "train.seed"
TRAIN_PRECISION_KEY = "train.precision"
TRAIN_LAMBDA_CO_KEY = "train.lambda_co"
TRAIN_LAMBDA_BAL_INIT_KEY = "train.lambda_bal_init"
TRAIN_LAMBDA_BAL_FIXED_KEY = "train.lambda_bal_fixed"

# output files
METRICS_FILENAME = "metrics.jsonl"
CHECKPOINT_FILENAME = "final.ckpt"
CONFIG_SNAPSHOT_FILENAME = "config.json"
ANALYSIS_DIRNAME = "analysis"
