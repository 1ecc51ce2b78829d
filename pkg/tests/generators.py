"""Seeded random generators for specs, responses and expression trees."""

from __future__ import annotations

import random

from rolereward import dsl
from rolereward.rewards import RewardSpec, SpecLabel

# Mixed-script pools. The near-miss table maps a keyword to lookalikes that
# must NOT satisfy it (width variants survive NFC; case variants only matter
# for STV, which folds case).
KEYWORDS = [
    "374",
    "潇湘馆",
    "苹果",
    "Paris",
    "café",
    "玉如意",
    "三十七",
    "dragon",
    "ＡＢＣ",
    "北京大学",
]
NEAR_MISS = {
    "374": ["37 4", "３７４", "384", "73 4"],
    "潇湘馆": ["潇 湘馆", "湘潇馆", "潇湘"],
    "苹果": ["苹 果", "果苹"],
    "Paris": ["P a r i s", "Pari s", "Ｐａｒｉｓ"],
    "café": ["cafe", "caf e"],
    "玉如意": ["玉 如意", "如意玉"],
    "三十七": ["三十 七", "三七十"],
    "dragon": ["drag0n", "d ragon"],
    "ＡＢＣ": ["A B C"],
    "北京大学": ["北京 大学", "大学北京"],
}
FILLER = [
    "我想了想。",
    "这件事说来话长，",
    "the night was quiet, ",
    "她转过身去，",
    "依我看，",
    "hmm... ",
    "且听我慢慢道来：",
    "(笑) ",
    "答案很明显：",
    "并非如此。",
]


def random_response(rng: random.Random, keyword: str) -> tuple[str, bool]:
    """A filler-padded response that contains the keyword verbatim, a
    near-miss, a case variant, or nothing related. Returns the text and
    whether the exact keyword is embedded verbatim."""
    roll = rng.random()
    pieces = rng.sample(FILLER, k=rng.randint(1, 3))
    if roll < 0.4:
        pieces.insert(rng.randrange(len(pieces) + 1), keyword)
        return "".join(pieces), True
    if roll < 0.6 and NEAR_MISS.get(keyword):
        pieces.insert(rng.randrange(len(pieces) + 1), rng.choice(NEAR_MISS[keyword]))
        return "".join(pieces), False
    if roll < 0.75 and keyword.lower() != keyword.upper():
        variant = keyword.swapcase() if rng.random() < 0.5 else keyword.upper()
        pieces.insert(rng.randrange(len(pieces) + 1), variant)
        return "".join(pieces), False  # verbatim absent; STV may still match by casefold
    return "".join(pieces), False


def random_spec(rng: random.Random, index: int) -> RewardSpec:
    if rng.random() < 0.5:
        return RewardSpec(id=f"g{index}", label=SpecLabel.STV, keyword=rng.choice(KEYWORDS))
    expr = random_expr(rng, max_depth=rng.randint(1, 4))
    return RewardSpec(id=f"g{index}", label=SpecLabel.MTDP, expression=expr)


LITERAL_POOL = KEYWORDS + ['say "no"', "back\\slash", "混合mix", "  padded  ", "。", "éclair"]


def random_expr(rng: random.Random, max_depth: int = 4) -> dsl.Expr:
    """Random well-formed tree within the structural limits."""
    if max_depth <= 0 or rng.random() < 0.35:
        literal = rng.choice(LITERAL_POOL)
        if rng.random() < 0.3:
            return dsl.CountAtLeast(literal, rng.randint(1, 3))
        return dsl.Contains(literal)
    kind = rng.choice(("not", "all", "any"))
    if kind == "not":
        return dsl.Not(random_expr(rng, max_depth - 1))
    children = tuple(random_expr(rng, max_depth - 1) for _ in range(rng.randint(2, 4)))
    return dsl.And(children) if kind == "all" else dsl.Or(children)


def random_eval_text(rng: random.Random) -> str:
    """Text for expression evaluation: filler plus a few pool literals so
    both branches of predicates get exercised."""
    parts = rng.sample(FILLER, k=rng.randint(0, 3))
    for _ in range(rng.randint(0, 3)):
        parts.append(rng.choice(LITERAL_POOL))
    rng.shuffle(parts)
    return "".join(parts)
