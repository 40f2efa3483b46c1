#!/usr/bin/env python3
"""Writes the scripted-session fixtures under tests/fixtures/scripts/.

Each scenario is a pair: <name>.json (the run-script input) and
<name>.canned.json (scripted model responses). tools/record_fixtures.sh then
turns the canned responses into replay fixtures keyed by request hash.
"""

import json
import os

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUT = os.path.join(ROOT, "tests", "fixtures", "scripts")


def fenced(code):
    return "Here is the result.\n\n```python\n" + code + "```\n"


SUITE_A = fenced('''import unittest
from solution import two_sum


class TestTwoSum(unittest.TestCase):
    def test_basic_pair(self):
        self.assertEqual(two_sum([2, 7, 11, 15], 9), [0, 1])

    def test_negative_numbers(self):
        self.assertEqual(two_sum([-3, 4, 3, 90], 0), [0, 2])

    def test_duplicate_values(self):
        self.assertEqual(two_sum([3, 3], 6), [0, 1])

    def test_no_pair(self):
        self.assertEqual(two_sum([1, 2, 3], 7), [])

    def test_empty_list(self):
        self.assertEqual(two_sum([], 1), [])


if __name__ == "__main__":
    unittest.main()
''')

SUITE_B = fenced('''from solution import two_sum


def test_pair_at_end(self):
    self.assertEqual(two_sum([1, 5, 8, 4], 12), [2, 3])


def test_zeros(self):
    self.assertEqual(two_sum([0, 4, 3, 0], 0), [0, 3])


def test_missing_pair(self):
    self.assertEqual(two_sum([5, 6], 1), [])


def test_single_element(self):
    self.assertEqual(two_sum([5], 10), [])
''')

# Seven ordinary cases and three "no answer" edge cases.
SUITE_10 = fenced('''import unittest
from solution import two_sum


class TestTwoSum(unittest.TestCase):
    def test_basic_pair(self):
        self.assertEqual(two_sum([2, 7, 11, 15], 9), [0, 1])

    def test_negative_numbers(self):
        self.assertEqual(two_sum([-3, 4, 3, 90], 0), [0, 2])

    def test_duplicate_values(self):
        self.assertEqual(two_sum([3, 3], 6), [0, 1])

    def test_pair_at_end(self):
        self.assertEqual(two_sum([1, 5, 8, 4], 12), [2, 3])

    def test_first_pair_wins(self):
        self.assertEqual(two_sum([1, 4, 4, 1], 5), [0, 1])

    def test_zeros(self):
        self.assertEqual(two_sum([0, 4, 3, 0], 0), [0, 3])

    def test_large_values(self):
        self.assertEqual(two_sum([10**9, -10**9, 5], 0), [0, 1])

    def test_no_pair(self):
        self.assertEqual(two_sum([1, 2, 3], 7), [])

    def test_empty_list(self):
        self.assertEqual(two_sum([], 1), [])

    def test_single_element(self):
        self.assertEqual(two_sum([5], 10), [])
''')

SINGLE_1 = fenced('''def test_negative_pair(self):
    self.assertEqual(two_sum([-1, -2, -3, -4], -7), [2, 3])
''')
SINGLE_2 = fenced('''def test_large_values(self):
    self.assertEqual(two_sum([10**9, -10**9, 5], 0), [0, 1])
''')

CORRECT = fenced('''def two_sum(nums, target):
    seen = {}
    for j, x in enumerate(nums):
        if target - x in seen:
            return [seen[target - x], j]
        if x not in seen:
            seen[x] = j
    return []
''')

# Right on every input that has a pair, None otherwise.
BUGGY = fenced('''def two_sum(nums, target):
    seen = {}
    for j, x in enumerate(nums):
        if target - x in seen:
            return [seen[target - x], j]
        seen.setdefault(x, j)
''')

BUGGY_2 = fenced('''def two_sum(nums, target):
    index = {}
    for j, x in enumerate(nums):
        if target - x in index:
            return [index[target - x], j]
        if x not in index:
            index[x] = j
    return None
''')

EXPLAIN_1 = "The test checks the example from the specification: 2 + 7 = 9 at indices 0 and 1."
EXPLAIN_2 = "The test checks that negative numbers are paired like any other value."
ADVICE_1 = "The function returns None when no pair exists; the specification asks for an empty list."

SPEC = "../specs/two_sum.toml"
PARTICIPANT = "P-00000000a001"


def step(at, action, **extra):
    d = {"at": at, "do": action}
    d.update(extra)
    return d


SCENARIOS = {
    "happy_path": (
        {"suite": [SUITE_A], "explain_test": [EXPLAIN_1], "single_test": [SINGLE_1], "function": [CORRECT]},
        [step(5, "produce_suite"), step(60, "explain", test=0),
         step(120, "regenerate_test", test=1, guidance="cover negative inputs"), step(417, "ask_function")],
    ),
    "never_pass": (
        {"suite": [SUITE_A], "function": [BUGGY], "regenerate_function": [BUGGY_2], "advice": [ADVICE_1]},
        [step(0, "produce_suite"), step(100, "ask_function"), step(200, "request_advice"),
         step(300, "regenerate_function", use_advice=True), step(2400, "tick")],
    ),
    "regen_twice": (
        {"suite": [SUITE_A], "function": [BUGGY], "regenerate_function": [BUGGY_2, CORRECT]},
        [step(0, "produce_suite"), step(30, "ask_function"), step(60, "regenerate_function"),
         step(90, "regenerate_function")],
    ),
    "advice_three": (
        {"suite": [SUITE_A], "function": [BUGGY], "advice": [ADVICE_1],
         "regenerate_function": [CORRECT]},
        [step(0, "produce_suite"), step(10, "ask_function"), step(20, "request_advice"),
         step(21, "request_advice"), step(22, "request_advice"),
         step(30, "regenerate_function", use_advice=True)],
    ),
    "curation_heavy": (
        {"suite": [SUITE_A], "explain_test": [EXPLAIN_1, EXPLAIN_2], "single_test": [SINGLE_1],
         "function": [CORRECT]},
        [step(0, "produce_suite"), step(10, "explain", test=0), step(20, "explain", test=1),
         step(30, "delete_test", test=2), step(40, "regenerate_test", test=0), step(50, "ask_function")],
    ),
    "suite_regens": (
        {"suite": [SUITE_A, SUITE_B, SUITE_A], "function": [CORRECT]},
        [step(0, "produce_suite"), step(10, "regenerate_suite", guidance="prefer edge cases"),
         step(20, "produce_suite"), step(30, "ask_function")],
    ),
    "edit_then_pass": (
        {"suite": [SUITE_A], "function": [CORRECT]},
        [step(0, "produce_suite"),
         step(15, "edit_test", test=1,
              body="def test_edited_pair(self):\n    self.assertEqual(two_sum([4, 6], 10), [0, 1])\n"),
         step(30, "ask_function")],
    ),
    "debounced_clicks": (
        {"suite": [SUITE_A], "explain_test": [EXPLAIN_1], "function": [CORRECT]},
        [step(0, "produce_suite"), step(0.1, "produce_suite"), step(10, "explain", test=0),
         step(10.1, "explain", test=0), step(10.6, "explain", test=0), step(20, "ask_function")],
    ),
    "closed_early": (
        {"suite": [SUITE_A], "explain_test": [EXPLAIN_1]},
        [step(0, "produce_suite"), step(10, "explain", test=0), step(20, "close")],
    ),
    "mixed": (
        {"suite": [SUITE_A, SUITE_B], "explain_test": [EXPLAIN_1], "single_test": [SINGLE_2],
         "function": [BUGGY], "advice": [ADVICE_1], "regenerate_function": [CORRECT]},
        [step(0, "produce_suite"), step(10, "regenerate_suite", guidance="cover empty input"), step(20, "explain", test=0),
         step(30, "ask_function"), step(40, "request_advice"), step(50, "regenerate_test", test=2),
         step(60, "regenerate_function")],
    ),
    "partial_10": (
        {"suite": [SUITE_10], "function": [BUGGY]},
        [step(0, "produce_suite"), step(10, "ask_function"), step(2400, "tick")],
    ),
}


def main():
    os.makedirs(OUT, exist_ok=True)
    for name, (canned, steps) in sorted(SCENARIOS.items()):
        script = {
            "session_id": name,
            "participant_id": PARTICIPANT,
            "task_id": "w-sum",
            "spec": SPEC,
            "budget_seconds": 2400,
            "start": "2025-03-01T09:00:00.000Z",
            "steps": steps,
        }
        with open(os.path.join(OUT, name + ".json"), "w", encoding="utf-8") as fh:
            json.dump(script, fh, indent=2)
            fh.write("\n")
        with open(os.path.join(OUT, name + ".canned.json"), "w", encoding="utf-8") as fh:
            json.dump(canned, fh, indent=2)
            fh.write("\n")
    print("wrote", len(SCENARIOS), "scenarios to", OUT)


if __name__ == "__main__":
    main()
