"""Phone inventories, folding tables and label <-> class-id codecs.

The evaluation set is the usual 39-phone fold of TIMIT. L2-ARCTIC adds
accented phones marked with a trailing ``*`` plus ``err``; those are kept as
independent classes. The CTC blank is always the last class.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

BLANK = "<blk>"
DROP = "-"
DEVIATION_MARK = "*"
UNJUDGEABLE = "err"


class PhoneError(ValueError):
    """Raised for unknown, malformed or duplicate phone labels."""


def check_label(label: str) -> str:
    if not isinstance(label, str) or not label:
        raise PhoneError(f"empty phone label: {label!r}")
    if any(ch.isspace() for ch in label):
        raise PhoneError(f"whitespace in phone label: {label!r}")
    if DEVIATION_MARK in label[:-1]:
        raise PhoneError(f"'*' allowed only as final character: {label!r}")
    return label


def read_fold_table(text: str) -> dict[str, str]:
    """Parse a two-column ``source folded`` table.

    Lines whose first non-blank character is ``#`` are comments (``h#`` is a
    TIMIT phone, so inline comments are not supported).
    """
    table: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise PhoneError(f"fold table line {lineno}: expected 2 columns, got {raw!r}")
        src, dst = parts
        if src in table:
            raise PhoneError(f"fold table line {lineno}: duplicate source {src!r}")
        table[src] = dst
    return table


def _data_text(name: str) -> str:
    return resources.files("aplmdd").joinpath("data", name).read_text(encoding="utf-8")


def _read_list(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append(check_label(line))
    return out


TIMIT61_TO_39 = read_fold_table(_data_text("timit61_to_39.txt"))
ARCTIC48_TO_39 = read_fold_table(_data_text("arctic48_to_39.txt"))
PHONES39 = tuple(sorted({v for v in TIMIT61_TO_39.values() if v != DROP}))
L2ARCTIC_SPECIALS = tuple(_read_list(_data_text("l2arctic_specials.txt")))


def fold_timit61(label: str) -> str:
    """Fold a TIMIT-61 symbol to the 39 set. Returns ``DROP`` for ``q``."""
    try:
        return TIMIT61_TO_39[label.lower()]
    except KeyError:
        raise PhoneError(f"unknown TIMIT-61 phone: {label!r}") from None


def fold_arctic48(label: str) -> str:
    """Fold an L2-ARCTIC label; deviation phones and ``err`` pass through."""
    lab = label.lower()
    if lab == UNJUDGEABLE:
        return lab
    if lab.endswith(DEVIATION_MARK):
        base = lab[:-1]
        if base in ARCTIC48_TO_39 or base in PHONES39:
            return check_label(lab)
        raise PhoneError(f"unknown deviation phone: {label!r}")
    if lab in ARCTIC48_TO_39:
        return ARCTIC48_TO_39[lab]
    if lab in PHONES39:
        return lab
    raise PhoneError(f"unknown L2-ARCTIC phone: {label!r}")


def drop_discarded(seq: Iterable[str]) -> list[str]:
    return [p for p in seq if p != DROP]


def is_special(label: str) -> bool:
    return label == UNJUDGEABLE or label.endswith(DEVIATION_MARK)


def specials_from_labels(labels: Iterable[str]) -> list[str]:
    """Collect the special classes actually used in a set of annotations."""
    return sorted({fold_arctic48(x) for x in labels if is_special(x.lower())})


@dataclass(frozen=True)
class PhoneInventory:
    classes: tuple[str, ...]
    blank_id: int
    fold_table: dict[str, str] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if len(set(self.classes)) != len(self.classes):
            raise PhoneError("duplicate class labels in inventory")
        if not 0 <= self.blank_id < len(self.classes) or self.classes[self.blank_id] != BLANK:
            raise PhoneError("blank_id must index the reserved blank label")
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(self.classes)})

    def __len__(self) -> int:
        return len(self.classes)

    def __contains__(self, label: str) -> bool:
        return label in self._index and label != BLANK

    @property
    def phones(self) -> list[str]:
        """Every non-blank label."""
        return [c for c in self.classes if c != BLANK]

    @property
    def standard_ids(self) -> list[int]:
        """Ids of non-blank, non-special classes."""
        return [i for i, c in enumerate(self.classes) if c != BLANK and not is_special(c)]

    def encode(self, seq: Sequence[str]) -> list[int]:
        out = []
        for lab in seq:
            idx = self._index.get(lab)
            if idx is None or idx == self.blank_id:
                raise PhoneError(f"label not in inventory: {lab!r}")
            out.append(idx)
        return out

    def decode(self, ids: Sequence[int]) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if not 0 <= i < len(self.classes) or i == self.blank_id:
                raise PhoneError(f"invalid class id: {i}")
            out.append(self.classes[i])
        return out

    def to_text(self) -> str:
        return "".join(f"{c}\n" for c in self.classes)

    @classmethod
    def from_text(cls, text: str) -> "PhoneInventory":
        classes = tuple(line.strip() for line in text.splitlines() if line.strip())
        if BLANK not in classes:
            raise PhoneError("inventory file has no blank entry")
        return cls(classes, classes.index(BLANK))

    def checksum(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def build_inventory(mode: str | Sequence[str] = "l2arctic-extended") -> PhoneInventory:
    """Build an inventory: sorted phones, then sorted specials, blank last.

    ``mode`` is ``"timit39"``, ``"l2arctic-extended"`` or an explicit list of
    labels for a custom inventory.
    """
    if isinstance(mode, str):
        if mode == "timit39":
            phones, specials, table = list(PHONES39), [], dict(TIMIT61_TO_39)
        elif mode == "l2arctic-extended":
            phones, specials, table = list(PHONES39), list(L2ARCTIC_SPECIALS), dict(ARCTIC48_TO_39)
        else:
            raise PhoneError(f"unknown inventory mode: {mode!r}")
    else:
        labels = [check_label(x) for x in mode]
        if len(set(labels)) != len(labels):
            dup = sorted({x for x in labels if labels.count(x) > 1})
            raise PhoneError(f"duplicate labels in custom inventory: {dup}")
        if BLANK in labels:
            raise PhoneError(f"{BLANK} is reserved")
        phones = [x for x in labels if not is_special(x)]
        specials = [x for x in labels if is_special(x)]
        table = {}
    classes = tuple(sorted(phones)) + tuple(sorted(specials)) + (BLANK,)
    return PhoneInventory(classes, len(classes) - 1, table)
