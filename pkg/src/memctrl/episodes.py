"""Corpus ingestion, synthetic corpus generation, and episode construction.

Corpora are CoNLL-style TSV: one "token<TAB>label" pair per line, blank
line between sequences. An episode groups sequences so that n_way entity
classes each receive exactly k_shot supporting sequences, then remaps
those classes to fresh episode-local ids. The per-episode permutation
keeps global label identities unlearnable, which is what makes k-shot
accuracy a meaningful few-shot metric. The non-entity class is always
present and always maps to local id n_way.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class CorpusFormatError(ValueError):
    """Malformed corpus file; carries the offending 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class LabeledSequence:
    """Token ids with one label id per token."""

    tokens: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.tokens.shape != self.labels.shape or self.tokens.ndim != 1:
            raise ValueError("tokens and labels must be equal-length 1-D arrays")
        if self.tokens.size == 0:
            raise ValueError("empty sequence")

    def __len__(self):
        return self.tokens.size


@dataclass
class Corpus:
    """Immutable set of labeled sequences plus the token/label vocabularies."""

    sequences: list
    token_names: list
    label_names: list
    non_entity: int

    @property
    def vocab_size(self) -> int:
        return len(self.token_names)

    @property
    def n_labels(self) -> int:
        return len(self.label_names)

    @property
    def entity_labels(self) -> list:
        return [i for i in range(self.n_labels) if i != self.non_entity]

    def entity_support(self) -> dict:
        """Map entity label -> indices of sequences containing it."""
        support = {c: [] for c in self.entity_labels}
        for idx, seq in enumerate(self.sequences):
            for c in np.unique(seq.labels):
                if c != self.non_entity:
                    support[int(c)].append(idx)
        return support


def load_corpus(path, non_entity_name: str = "O") -> Corpus:
    """Parse a CoNLL-style TSV file.

    Token and label vocabularies are assigned ids in first-seen order, so
    the same file always loads to the same corpus. The non-entity label
    must appear in the file under `non_entity_name`.
    """
    token_ids: dict = {}
    label_ids: dict = {}
    token_names: list = []
    label_names: list = []
    sequences: list = []
    cur_tokens: list = []
    cur_labels: list = []

    def flush():
        if cur_tokens:
            sequences.append(LabeledSequence(np.array(cur_tokens), np.array(cur_labels)))
            cur_tokens.clear()
            cur_labels.clear()

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if line == "":
                flush()
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise CorpusFormatError(line_no, f"expected 'token<TAB>label', got {line!r}")
            tok, lab = parts
            if tok not in token_ids:
                token_ids[tok] = len(token_names)
                token_names.append(tok)
            if lab not in label_ids:
                label_ids[lab] = len(label_names)
                label_names.append(lab)
            cur_tokens.append(token_ids[tok])
            cur_labels.append(label_ids[lab])
    flush()

    if not sequences:
        raise CorpusFormatError(0, "corpus file contains no sequences")
    if non_entity_name not in label_ids:
        raise ValueError(f"non-entity label {non_entity_name!r} not present in corpus")
    return Corpus(sequences, token_names, label_names, label_ids[non_entity_name])


def save_corpus(corpus: Corpus, path):
    """Write a corpus in the same TSV format load_corpus reads."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for si, seq in enumerate(corpus.sequences):
            if si:
                fh.write("\n")
            for tok, lab in zip(seq.tokens, seq.labels):
                fh.write(f"{corpus.token_names[tok]}\t{corpus.label_names[lab]}\n")


def synthetic_corpus(seed: int, n_classes: int = 8, n_sequences: int = 2000,
                     seq_len_range=(6, 12), vocab_size: int = 200,
                     markers_per_class: int = 2,
                     markers_per_sequence: int = 2) -> Corpus:
    """Seed-deterministic labeled corpus with one entity class per sequence.

    Each class owns a disjoint set of marker tokens; a sequence draws one
    class, plants `markers_per_sequence` marker tokens of that class at
    random positions, and fills the rest with background tokens labeled
    non-entity. Single-entity sequences make uniform episode support
    exact by construction.
    """
    if n_classes < 2:
        raise ValueError("need at least 2 entity classes")
    lo, hi = seq_len_range
    if lo < markers_per_sequence + 1:
        raise ValueError("sequences too short to hold markers plus background")
    n_marker_tokens = n_classes * markers_per_class
    if vocab_size <= n_marker_tokens:
        raise ValueError("vocab_size leaves no room for background tokens")

    rng = np.random.default_rng(seed)
    token_names = [f"m{c}_{j}" for c in range(n_classes) for j in range(markers_per_class)]
    token_names += [f"w{i}" for i in range(vocab_size - n_marker_tokens)]
    label_names = ["O"] + [f"E{c}" for c in range(n_classes)]

    sequences = []
    for _ in range(n_sequences):
        cls = int(rng.integers(n_classes))
        length = int(rng.integers(lo, hi + 1))
        tokens = rng.integers(n_marker_tokens, vocab_size, size=length)
        labels = np.zeros(length, dtype=np.int64)
        positions = rng.choice(length, size=markers_per_sequence, replace=False)
        for p in positions:
            tokens[p] = cls * markers_per_class + rng.integers(markers_per_class)
            labels[p] = cls + 1
        sequences.append(LabeledSequence(tokens, labels))
    return Corpus(sequences, token_names, label_names, non_entity=0)


@dataclass
class Episode:
    """Ordered labeled sequences with a fresh local relabeling of n_way classes.

    `label_map` is a bijection from the chosen true class ids to local
    ids 0..n_way-1; everything else (the non-entity class, plus any
    entity class not chosen for the episode) maps to local id n_way.
    """

    items: list
    label_map: dict
    n_way: int
    k_shot: int
    achieved_support: dict = field(default_factory=dict)

    @property
    def non_entity_local(self) -> int:
        return self.n_way

    def local_labels(self, seq: LabeledSequence) -> np.ndarray:
        out = np.full(seq.labels.shape, self.non_entity_local, dtype=np.int64)
        for true_id, local_id in self.label_map.items():
            out[seq.labels == true_id] = local_id
        return out

    def presentation_schedule(self):
        """Yield (item_index, true class, presentation number j) triples.

        An item presents every chosen entity class it contains; j counts
        that class's presentations in episode order, starting at 1.
        """
        seen = {c: 0 for c in self.label_map}
        for idx, seq in enumerate(self.items):
            for c in np.unique(seq.labels):
                c = int(c)
                if c in self.label_map:
                    seen[c] += 1
                    yield idx, c, seen[c]


def make_episode(corpus: Corpus, n_way: int, k_shot: int,
                 rng: np.random.Generator) -> Episode:
    """Sample an n_way/k_shot episode with uniform class support.

    Classes are drawn among those with at least k_shot supporting
    sequences. On single-entity corpora the support histogram is exactly
    uniform; with co-occurring entities a greedy pass picks sequences
    that minimize overshoot and the achieved histogram is logged.
    """
    support = corpus.entity_support()
    eligible = sorted(c for c, idxs in support.items() if len(idxs) >= k_shot)
    if len(eligible) < n_way:
        raise ValueError(
            f"corpus supports only {len(eligible)} classes at k_shot={k_shot}, "
            f"need {n_way}")
    classes = [int(c) for c in rng.choice(eligible, size=n_way, replace=False)]

    single_entity = all(
        np.unique(seq.labels[seq.labels != corpus.non_entity]).size <= 1
        for seq in corpus.sequences
    )
    if single_entity:
        chosen: list = []
        for c in classes:
            picks = rng.choice(support[c], size=k_shot, replace=False)
            chosen.extend(int(i) for i in picks)
    else:
        chosen = _greedy_uniform_selection(corpus, classes, k_shot)

    order = np.array(chosen)
    rng.shuffle(order)
    items = [corpus.sequences[i] for i in order]

    perm = rng.permutation(n_way)
    label_map = {c: int(perm[i]) for i, c in enumerate(classes)}

    achieved = {c: 0 for c in classes}
    for seq in items:
        for c in np.unique(seq.labels):
            if int(c) in achieved:
                achieved[int(c)] += 1
    if not single_entity:
        logger.debug("episode support histogram: %s", achieved)
    return Episode(items=items, label_map=label_map, n_way=n_way,
                   k_shot=k_shot, achieved_support=achieved)


def _greedy_uniform_selection(corpus: Corpus, classes, k_shot: int) -> list:
    """Pick sequences that approach k_shot support per class.

    Repeatedly takes the sequence covering the most under-supported
    classes with the least overshoot of already-full ones; deterministic
    scan order, lowest index wins ties.
    """
    wanted = set(classes)
    counts = {c: 0 for c in classes}
    pool = [
        i for i, seq in enumerate(corpus.sequences)
        if wanted.intersection(int(c) for c in np.unique(seq.labels))
    ]
    used: set = set()
    chosen: list = []
    while any(counts[c] < k_shot for c in classes):
        best = None
        best_score = None
        for i in pool:
            if i in used:
                continue
            present = [c for c in np.unique(corpus.sequences[i].labels) if int(c) in wanted]
            gain = sum(1 for c in present if counts[int(c)] < k_shot)
            if gain == 0:
                continue
            overshoot = sum(1 for c in present if counts[int(c)] >= k_shot)
            score = (-gain, overshoot, i)
            if best_score is None or score < best_score:
                best_score = score
                best = i
        if best is None:
            deficit = {c: k_shot - counts[c] for c in classes if counts[c] < k_shot}
            raise ValueError(f"insufficient support to reach k_shot: missing {deficit}")
        used.add(best)
        chosen.append(best)
        for c in np.unique(corpus.sequences[best].labels):
            if int(c) in counts:
                counts[int(c)] += 1
    return chosen
