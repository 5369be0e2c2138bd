"""Corpora, relation schemas, bags, validation splits and vocabularies.

Relation indices are 0-based in code: index 0 is always ``"NA"``.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NA = "NA"
PAD = "<pad>"
UNK = "<unk>"


class CorpusError(ValueError):
    pass


class CorpusWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RelationSchema:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ValueError(f"a schema needs at least 2 labels, got {len(labels)}")
        if labels[0] != NA:
            raise ValueError(f"first schema label must be {NA!r}, got {labels[0]!r}")
        if len(set(labels)) != len(labels):
            dupes = sorted(k for k, c in Counter(labels).items() if c > 1)
            raise ValueError(f"duplicate relation labels: {dupes}")
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def K(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"relation {label!r} is not in the schema") from None

    def __contains__(self, label: str) -> bool:
        return label in self._index

    @classmethod
    def load(cls, path) -> "RelationSchema":
        labels = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise ValueError(f"{path}: schema must be a JSON array of strings")
        return cls(tuple(labels))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(list(self.labels)) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Instance:
    tokens: tuple[str, ...]
    head_span: tuple[int, int]
    tail_span: tuple[int, int]
    head_id: str
    tail_id: str
    relation: str
    true_relation: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "head_span", tuple(self.head_span))
        object.__setattr__(self, "tail_span", tuple(self.tail_span))
        n = len(self.tokens)
        for name, (start, end) in (("head", self.head_span), ("tail", self.tail_span)):
            if not 0 <= start < end <= n:
                raise CorpusError(f"{name} span ({start}, {end}) invalid for {n} tokens")
        (hs, he), (ts, te) = self.head_span, self.tail_span
        if hs < te and ts < he:
            raise CorpusError(f"head span {self.head_span} overlaps tail span {self.tail_span}")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.head_id, self.tail_id)

    def to_json(self) -> dict:
        obj = {
            "tokens": list(self.tokens),
            "head": {"id": self.head_id, "start": self.head_span[0], "end": self.head_span[1]},
            "tail": {"id": self.tail_id, "start": self.tail_span[0], "end": self.tail_span[1]},
            "relation": self.relation,
        }
        if self.true_relation is not None:
            obj["true_relation"] = self.true_relation
        return obj


def _parse_instance(obj, schema: RelationSchema) -> Instance:
    if not isinstance(obj, dict):
        raise CorpusError("line is not a JSON object")
    try:
        tokens = obj["tokens"]
        head, tail = obj["head"], obj["tail"]
        relation = obj["relation"]
        inst = Instance(
            tokens=tuple(str(t) for t in tokens),
            head_span=(int(head["start"]), int(head["end"])),
            tail_span=(int(tail["start"]), int(tail["end"])),
            head_id=str(head["id"]),
            tail_id=str(tail["id"]),
            relation=str(relation),
            true_relation=obj.get("true_relation"),
        )
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"missing or malformed field: {exc}") from None
    for lab in (inst.relation, inst.true_relation):
        if lab is not None and lab not in schema:
            raise CorpusError(f"unknown relation label {lab!r}")
    return inst


def load_corpus(path, schema: RelationSchema, strict: bool = True) -> list[Instance]:
    """Read a JSONL corpus.

    In strict mode the first bad line raises :class:`CorpusError`; otherwise
    bad lines are skipped with a :class:`CorpusWarning` each.
    """
    instances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"invalid JSON: {exc.msg}") from None
                instances.append(_parse_instance(obj, schema))
            except CorpusError as exc:
                msg = f"{path}:{lineno}: {exc}"
                if strict:
                    raise CorpusError(msg) from None
                warnings.warn(msg, CorpusWarning, stacklevel=2)
    return instances


def write_corpus(instances, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_json(), ensure_ascii=False) + "\n")


def import_nyt_json(path, schema: RelationSchema | None = None) -> tuple[list[Instance], RelationSchema]:
    """Best-effort reader for the public preprocessed NYT release.

    Accepts a JSON array or JSON lines of
    ``{"sentence", "head": {"word", "id"}, "tail": {"word", "id"}, "relation"}``.
    Sentences are whitespace-tokenized and each entity is located as the
    first matching token run; records that cannot be aligned are skipped
    with a warning. Without a schema, one is built from the labels seen.
    """
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        records = json.loads(text)
    else:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]

    def locate(tokens, words, avoid=None):
        n = len(words)
        for i in range(len(tokens) - n + 1):
            if tokens[i:i + n] == words and (avoid is None or i + n <= avoid[0] or i >= avoid[1]):
                return (i, i + n)
        return None

    if schema is None:
        seen = sorted({r["relation"] for r in records} - {NA})
        schema = RelationSchema((NA, *seen))
    out = []
    for k, rec in enumerate(records):
        tokens = rec["sentence"].split()
        hspan = locate(tokens, rec["head"]["word"].split())
        tspan = locate(tokens, rec["tail"]["word"].split(), avoid=hspan)
        if hspan is None or tspan is None or rec["relation"] not in schema:
            warnings.warn(f"{path}: record {k} skipped (entity not found or unknown relation)",
                          CorpusWarning, stacklevel=2)
            continue
        out.append(Instance(tuple(tokens), hspan, tspan, str(rec["head"]["id"]),
                            str(rec["tail"]["id"]), rec["relation"]))
    return out, schema


# bags ---------------------------------------------------------------------

@dataclass(frozen=True)
class Bag:
    head_id: str
    tail_id: str
    relation: str | None  # None for evaluation bags
    instances: tuple[Instance, ...]

    def __post_init__(self):
        if not self.instances:
            raise ValueError("a bag needs at least one instance")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.head_id, self.tail_id)

    @property
    def observed(self) -> tuple[str, ...]:
        """Distinct observed labels, sorted."""
        return tuple(sorted({i.relation for i in self.instances}))

    def __len__(self) -> int:
        return len(self.instances)


def group_bags(instances, mode: str = "train") -> list[Bag]:
    """Group by (head, tail, relation) in train mode, by (head, tail) in eval mode."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    groups: dict[tuple, list[Instance]] = {}
    for inst in instances:
        key = (inst.head_id, inst.tail_id, inst.relation) if mode == "train" else inst.pair
        groups.setdefault(key, []).append(inst)
    bags = []
    for key in sorted(groups):
        rel = key[2] if mode == "train" else None
        bags.append(Bag(key[0], key[1], rel, tuple(groups[key])))
    return bags


def split_validation(bags, fraction: float, seed: int) -> tuple[list[Bag], list[Bag]]:
    """Hold out a random ``fraction`` of entity pairs (with all their bags)."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    pairs = sorted({b.pair for b in bags})
    if len(pairs) < 2:
        raise ValueError(f"need at least 2 distinct entity pairs to split, got {len(pairs)}")
    n_val = min(max(int(round(fraction * len(pairs))), 1), len(pairs) - 1)
    order = np.random.default_rng(seed).permutation(len(pairs))
    held = {pairs[i] for i in order[:n_val]}
    train = [b for b in bags if b.pair not in held]
    val = [b for b in bags if b.pair in held]
    return train, val


def gold_triples(instances) -> set[tuple[str, str, str]]:
    """Positive (head, tail, relation) triples observed in a corpus."""
    return {(i.head_id, i.tail_id, i.relation) for i in instances if i.relation != NA}


# vocabulary ----------------------------------------------------------------

@dataclass
class Vocabulary:
    tokens: list[str]
    embeddings: np.ndarray
    from_file: np.ndarray = field(default=None)

    PAD_INDEX = 0
    UNK_INDEX = 1

    def __post_init__(self):
        if self.tokens[:2] != [PAD, UNK]:
            raise ValueError(f"vocabulary must start with {PAD!r}, {UNK!r}")
        if self.embeddings.shape[0] != len(self.tokens):
            raise ValueError(f"{len(self.tokens)} tokens but {self.embeddings.shape[0]} embedding rows")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if self.from_file is None:
            self.from_file = np.zeros(len(self.tokens), dtype=bool)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def lookup(self, tokens) -> np.ndarray:
        get = self.index.get
        return np.fromiter((get(t, self.UNK_INDEX) for t in tokens), dtype=np.intp, count=len(tokens))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.tokens, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path, dim: int) -> "Vocabulary":
        tokens = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(tokens, np.zeros((len(tokens), dim)))


def _random_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return rng.uniform(-0.25, 0.25, size=(n, dim))


def build_vocabulary(instances, dim: int, seed: int = 0, min_count: int = 1) -> Vocabulary:
    counts = Counter(t for inst in instances for t in inst.tokens)
    words = sorted(t for t, c in counts.items() if c >= min_count and t not in (PAD, UNK))
    tokens = [PAD, UNK, *words]
    emb = _random_rows(np.random.default_rng(seed), len(tokens), dim)
    emb[Vocabulary.PAD_INDEX] = 0.0
    return Vocabulary(tokens, emb)


def load_pretrained_embeddings(path, vocabulary: Vocabulary, seed: int = 0) -> Vocabulary:
    """Fill vocabulary rows from a ``token v1 ... vd`` text file.

    Rows missing from the file are drawn uniformly from [-0.25, 0.25]; the
    padding row stays zero. A leading word2vec ``count dim`` header is skipped.
    """
    dim = vocabulary.dim
    emb = _random_rows(np.random.default_rng(seed), len(vocabulary), dim)
    from_file = np.zeros(len(vocabulary), dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            if len(parts) - 1 != dim:
                raise ValueError(f"{path}:{lineno}: embedding dimension {len(parts) - 1} "
                                 f"does not match vocabulary dimension {dim}")
            idx = vocabulary.index.get(parts[0])
            if idx is not None and idx != Vocabulary.PAD_INDEX:
                emb[idx] = np.array(parts[1:], dtype=np.float64)
                from_file[idx] = True
    emb[Vocabulary.PAD_INDEX] = 0.0
    return Vocabulary(list(vocabulary.tokens), emb, from_file)
