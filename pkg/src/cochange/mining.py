"""Association rule mining over co-change transactions.

Transactions are sets of file paths extracted from history; rules are
mined level-wise (frequent itemsets with candidate pruning) and scored
with exact rational support and confidence.  Floats never enter the
mining path.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence


@dataclass(frozen=True)
class Transaction:
    """One changeset offered to the miner, tagged with its source commit."""

    files: frozenset[str]
    source_commit: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "files", frozenset(self.files))
        if not self.files:
            raise ValueError("transaction must contain at least one file")


# A transaction database is simply an ordered list of transactions,
# newest first.  Order matters to the collectors, not to the miner.
TransactionDatabase = list[Transaction]


@dataclass(frozen=True)
class AssociationRule:
    antecedent: frozenset[str]
    consequent: frozenset[str]
    support: Fraction
    confidence: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "antecedent", frozenset(self.antecedent))
        object.__setattr__(self, "consequent", frozenset(self.consequent))
        if not self.antecedent or not self.consequent:
            raise ValueError("rule sides must be non-empty")
        if self.antecedent & self.consequent:
            raise ValueError("rule sides must be disjoint")
        if not (0 < self.support <= 1):
            raise ValueError(f"support out of range: {self.support}")
        if not (self.support <= self.confidence <= 1):
            raise ValueError(f"confidence out of range: {self.confidence}")


def support(db: Sequence[Transaction], itemset: Iterable[str]) -> Fraction:
    """Fraction of transactions containing every item of ``itemset``."""
    items = frozenset(itemset)
    if not db:
        raise ValueError("support is undefined on an empty database")
    if not items:
        raise ValueError("support is undefined for the empty itemset")
    hits = sum(1 for t in db if items <= t.files)
    return Fraction(hits, len(db))


def confidence(
    db: Sequence[Transaction],
    antecedent: Iterable[str],
    consequent: Iterable[str],
) -> Fraction:
    """support(antecedent | consequent) / support(antecedent)."""
    x = frozenset(antecedent)
    y = frozenset(consequent)
    sx = support(db, x)
    if sx == 0:
        raise ValueError("confidence is undefined: antecedent never occurs")
    return support(db, x | y) / sx


def _validate_threshold(name: str, value: Fraction) -> Fraction:
    value = Fraction(value)
    if not (0 < value <= 1):
        raise ValueError(f"{name} must be in (0, 1]: {value}")
    return value


def _frequent_itemsets(
    tx: list[frozenset[str]], n: int, minsup: Fraction
) -> dict[frozenset[str], int]:
    """Level-wise frequent itemset counts.

    (k+1)-candidates are joined from frequent k-itemsets sharing a
    (k-1)-prefix and pruned unless every k-subset is frequent.
    """
    counts: dict[frozenset[str], int] = {}
    singles = Counter(f for t in tx for f in t)
    level = []
    for item, c in singles.items():
        if Fraction(c, n) >= minsup:
            s = frozenset((item,))
            counts[s] = c
            level.append(s)

    while level:
        level_set = set(level)
        tuples = sorted(tuple(sorted(s)) for s in level)
        candidates: list[frozenset[str]] = []
        for i in range(len(tuples)):
            for j in range(i + 1, len(tuples)):
                a, b = tuples[i], tuples[j]
                if a[:-1] != b[:-1]:
                    break
                cand = frozenset(a + (b[-1],))
                if all(cand - {x} in level_set for x in cand):
                    candidates.append(cand)
        level = []
        for cand in candidates:
            c = sum(1 for t in tx if cand <= t)
            if c and Fraction(c, n) >= minsup:
                counts[cand] = c
                level.append(cand)
    return counts


def _mining_input(
    db: Sequence[Transaction], minsup: Fraction, minconf: Fraction
) -> tuple[list[frozenset[str]], Fraction, Fraction]:
    if not db:
        raise ValueError("cannot mine an empty transaction database")
    minsup = _validate_threshold("minsup", minsup)
    minconf = _validate_threshold("minconf", minconf)
    return [t.files for t in db], minsup, minconf


def apriori(
    db: Sequence[Transaction], minsup: Fraction, minconf: Fraction
) -> set[AssociationRule]:
    """All rules x -> y with support(x|y) >= minsup and confidence >= minconf.

    Rules are generated from every split of every frequent itemset of
    size >= 2; consequents of any size are produced here (the
    single-consequent restriction lives in filter_rules).
    """
    tx, minsup, minconf = _mining_input(db, minsup, minconf)
    n = len(db)
    counts = _frequent_itemsets(tx, n, minsup)

    rules: set[AssociationRule] = set()
    for itemset, c_all in counts.items():
        if len(itemset) < 2:
            continue
        members = sorted(itemset)
        for k in range(1, len(members)):
            for ante in combinations(members, k):
                x = frozenset(ante)
                conf = Fraction(c_all, counts[x])
                if conf >= minconf:
                    rules.add(
                        AssociationRule(x, itemset - x, Fraction(c_all, n), conf)
                    )
    return rules


def single_consequent_rules(
    db: Sequence[Transaction], minsup: Fraction, minconf: Fraction
) -> list[AssociationRule]:
    """Rules x -> {y} only, unordered.

    Equal to filtering apriori's output down to one-file consequents,
    but skips the exponential sweep over wider splits, which matters on
    small databases where every subset of a wide changeset is frequent.
    A frequent itemset of size >= 2 yields some split at >= minconf iff
    it yields a single-consequent one (shrinking the consequent can only
    raise confidence), so even rule existence is preserved.
    """
    tx, minsup, minconf = _mining_input(db, minsup, minconf)
    n = len(db)
    counts = _frequent_itemsets(tx, n, minsup)

    rules: list[AssociationRule] = []
    for itemset, c_all in counts.items():
        if len(itemset) < 2:
            continue
        sup = Fraction(c_all, n)
        for item in itemset:
            x = itemset - {item}
            conf = Fraction(c_all, counts[x])
            if conf >= minconf:
                rules.append(AssociationRule(x, frozenset((item,)), sup, conf))
    return rules


def _rule_order(rule: AssociationRule):
    # descending support, descending confidence, small antecedents first,
    # then lexicographic file order for full determinism
    return (
        -rule.support,
        -rule.confidence,
        len(rule.antecedent),
        tuple(sorted(rule.antecedent)),
        tuple(sorted(rule.consequent)),
    )


def filter_rules(
    rules: Iterable[AssociationRule], max_rules: int = 10
) -> list[AssociationRule]:
    """Keep single-consequent rules, best ``max_rules`` of them.

    The ordering is a total order, so the result does not depend on the
    input ordering.
    """
    if max_rules < 1:
        raise ValueError("max_rules must be positive")
    kept = [r for r in rules if len(r.consequent) == 1]
    kept.sort(key=_rule_order)
    return kept[:max_rules]
