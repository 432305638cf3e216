from .campaign import CampaignResult, Coordinator, LockstepFuzzer, ThreadedFuzzer, run_campaign
from .lob import EXPLORE, PRUNE, LobFilter, lob_mode_filter
from .report import build_report, load_report, write_report
from .scoring import (
    BranchStats,
    RewardIndex,
    fuzzing_difficulty,
    future_reward,
    local_probability,
    log_fuzzing_difficulty,
    normalize_difficulty,
    priority,
)
from .strategy import (
    HIGH,
    LOW,
    BranchQueues,
    OpenBranchEntry,
    StrategyParams,
    apply_loop_rule,
    build_queues,
    most_prioritized_seed,
    score_open_branches,
    search_and_sample_strategy,
)
from .tree import TERMINAL, TRUNCATED, UNEXPLORED, DivergentPath, ExecutionTree, OpenBranch
