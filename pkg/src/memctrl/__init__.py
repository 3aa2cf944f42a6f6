"""memctrl: a sparse key-value memory managed by an RL-trained controller.

An LSTM encoder turns token sequences into states; a stochastic policy
decides which memory slot absorbs each state, rewarded by how much the
operation sharpens the attention over the memory. The package provides
the numerics, encoder, memory, controller, episodic data machinery,
heuristic baselines, and a deterministic train/eval loop.
"""

from .numerics import (
    cosine_similarity,
    entropy,
    finite_diff_grad,
    l2_normalize,
    softmax,
    validate_prob_dist,
)
from .encoder import (
    LstmCache,
    LstmGrads,
    LstmParams,
    LstmState,
    encode_sequence,
    init_lstm_params,
    lstm_backward,
    lstm_step,
)
from .memory import (
    EMPTY_LABEL,
    MemOpRecord,
    SparseMemory,
    apply_op,
    attention,
    candidate_set,
    init_memory,
    nearest_key,
    predict_label,
)
from .controller import (
    PolicyStep,
    Trajectory,
    aux_state_gradient,
    controller_step,
    mean_policy_entropy,
    mean_return,
    operate_with_reward,
    policy_distribution,
    reinforce_gradient,
    returns_to_go,
    reward,
    select_index,
    state_gradients,
)
from .episodes import (
    Corpus,
    CorpusFormatError,
    Episode,
    LabeledSequence,
    load_corpus,
    make_episode,
    save_corpus,
    synthetic_corpus,
)
from .baselines import HeuristicPolicy, heuristic_step, predict_baseline
from .config import Config, config_hash, load_config, save_config
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .trainer import (
    EvalTable,
    MetricsRecord,
    TrainingDiverged,
    evaluate,
    run_episode,
    train,
)

__version__ = "0.1.0"
