#!/usr/bin/env python3
"""Regenerate the bundled scenario files and the toy problem set.

The committed JSON under src/cotgate/data/ is the output of this script;
rerun it after changing anything here. The interesting fixture is
min_products: a coin-change style problem where the backend's greedy
argmax prefers a plausible but wrong largest-first loop, while a
dynamic-programming line hides at rank two. The first body line is the
only high-uncertainty position, so gated runs deliberate exactly there.
"""

from __future__ import annotations

import json
from pathlib import Path

from cotgate.providers.scenario import ScenarioBuilder

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "cotgate" / "data"

VOCAB_SIZE = 50

PROMPT_MIN = (
    "def min_products(prices, n):\n"
    '    """Fewest products, repetition allowed, that spend exactly n\n'
    '    dollars; -1 if no combination works."""\n'
)

FLAWED_FIRST = "    prices = sorted(prices, reverse=True)\n"
DP_FIRST = "    dp = [0] + [float('inf')] * n\n"
DP_COMMENT = "# Use dynamic programming over amounts 0..n"

# Entropy of this four-way split is about 1.245 nats; against a vocabulary
# of 50 that normalizes to about 0.318, above the 0.25 default threshold.
DECISION = [
    (FLAWED_FIRST, 0.42),
    (DP_FIRST, 0.33),
    ("    total = 0\n", 0.15),
    ("    count = 0\n", 0.10),
]

FLAWED_REST = [
    "    count = 0\n",
    "    for price in prices:\n",
    "        while n >= price:\n",
    "            n -= price\n",
    "            count += 1\n",
    "    return count if n == 0 else -1\n",
]

DP_REST = [
    "    for amount in range(1, n + 1):\n",
    "        for price in prices:\n",
    "            if price <= amount and dp[amount - price] + 1 < dp[amount]:\n",
    "                dp[amount] = dp[amount - price] + 1\n",
    "    return dp[n] if dp[n] != float('inf') else -1\n",
]


def script_min_products(builder: ScenarioBuilder, prompt: str) -> None:
    builder.distribution(prompt, DECISION)

    ctx = builder.greedy_chain(prompt + FLAWED_FIRST, FLAWED_REST)
    builder.eos(ctx)

    ctx = builder.greedy_chain(prompt + DP_COMMENT + "\n" + DP_FIRST, DP_REST)
    builder.eos(ctx)

    builder.sample(prompt, 0, [
        ("# Take the largest prices first and subtract while they fit\n", 0.3),
        (FLAWED_FIRST, 0.40),
    ])
    builder.sample(prompt, 1, [
        (DP_COMMENT + "\n", 0.3),
        (DP_FIRST, 0.88),
    ])
    builder.sample(prompt, 2, [
        ("# Try the biggest price repeatedly until nothing fits\n", 0.3),
        (FLAWED_FIRST, 0.35),
    ])
    builder.sample(prompt, 3, [
        ("# Build the fewest-items table from 0 up to n\n", 0.3),
        (DP_FIRST, 0.82),
    ])
    # Comments with no code line at all: a degenerate branch.
    builder.sample(prompt, 4, [
        ("# The smallest count is what we want\n", 0.5),
        ("# but a direct scan seems hard\n", 0.5),
    ])
    builder.sample(prompt, "*", [
        (FLAWED_FIRST, 0.40),
    ])


def build_dp_vs_greedy() -> None:
    builder = ScenarioBuilder(vocab_size=VOCAB_SIZE, name="dp_vs_greedy")
    script_min_products(builder, PROMPT_MIN)
    builder.add_prompt("main", PROMPT_MIN)
    builder.write(DATA_DIR / "scenarios" / "dp_vs_greedy.json")


TOY_PROBLEMS = [
    {
        "task_id": "toy/add2",
        "entry_point": "add2",
        "prompt": 'def add2(a, b):\n    """Sum of a and b."""\n',
        "body": ["    return a + b\n"],
        "test_code": (
            "def check(candidate):\n"
            "    assert candidate(1, 2) == 3\n"
            "    assert candidate(-1, 1) == 0\n"
        ),
    },
    {
        "task_id": "toy/is_even",
        "entry_point": "is_even",
        "prompt": 'def is_even(n):\n    """True when n is even."""\n',
        "body": ["    return n % 2 == 0\n"],
        "test_code": (
            "def check(candidate):\n"
            "    assert candidate(2)\n"
            "    assert not candidate(3)\n"
            "    assert candidate(0)\n"
        ),
    },
    {
        "task_id": "toy/last_char",
        "entry_point": "last_char",
        "prompt": 'def last_char(s):\n    """Last character of a non-empty string."""\n',
        "body": ["    return s[-1]\n"],
        "test_code": (
            "def check(candidate):\n"
            '    assert candidate("abc") == "c"\n'
            '    assert candidate("x") == "x"\n'
        ),
    },
    {
        # The backend is confidently wrong here: result starts at 0, so the
        # product never leaves 0. Every line is one-hot, so no threshold can
        # rescue it; it fails under every mode.
        "task_id": "toy/fact",
        "entry_point": "fact",
        "prompt": 'def fact(n):\n    """Product 1 * 2 * ... * n, with fact(0) == 1."""\n',
        "body": [
            "    result = 0\n",
            "    for i in range(1, n + 1):\n",
            "        result *= i\n",
            "    return result\n",
        ],
        "test_code": (
            "def check(candidate):\n"
            "    assert candidate(0) == 1\n"
            "    assert candidate(4) == 24\n"
        ),
    },
    {
        "task_id": "toy/min_products",
        "entry_point": "min_products",
        "prompt": PROMPT_MIN,
        "body": None,
        "test_code": (
            "def check(candidate):\n"
            "    assert candidate([1], 5) == 5\n"
            "    assert candidate([3, 4], 6) == 2\n"
            "    assert candidate([2], 3) == -1\n"
        ),
    },
]


def build_toy_suite() -> None:
    builder = ScenarioBuilder(vocab_size=VOCAB_SIZE, name="toy_suite")
    for problem in TOY_PROBLEMS:
        prompt = problem["prompt"]
        if problem["body"] is None:
            script_min_products(builder, prompt)
        else:
            ctx = builder.greedy_chain(prompt, problem["body"])
            builder.eos(ctx)
        builder.add_prompt(problem["task_id"], prompt)
    builder.write(DATA_DIR / "scenarios" / "toy_suite.json")

    rows = []
    for problem in TOY_PROBLEMS:
        rows.append(json.dumps({
            "task_id": problem["task_id"],
            "prompt": problem["prompt"],
            "test_code": problem["test_code"],
            "entry_point": problem["entry_point"],
        }, ensure_ascii=False))
    dataset = DATA_DIR / "datasets" / "toy5.jsonl"
    dataset.write_text("\n".join(rows) + "\n", encoding="utf-8")


def main() -> None:
    (DATA_DIR / "scenarios").mkdir(parents=True, exist_ok=True)
    (DATA_DIR / "datasets").mkdir(parents=True, exist_ok=True)
    build_dp_vs_greedy()
    build_toy_suite()
    print(f"fixtures written under {DATA_DIR}")


if __name__ == "__main__":
    main()
