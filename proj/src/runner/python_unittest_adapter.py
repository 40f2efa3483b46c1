"""Reference runner for the python-unittest profile.

Reads suite.json from its own directory, imports the candidate module, runs
every test body in an isolated namespace and writes the canonical report:

    {"tests": [{"id", "name", "outcome", "message"}],
     "coverage": {"executable": int, "executed": int}}

Outcomes are "pass", "fail" (assertion / unittest failure) or "error".
A partial JSONL report is flushed after every test so the harness can
recover finished results when the run is killed on timeout.
"""

import argparse
import importlib.util
import json
import os
import re
import sys
import unittest

HERE = os.path.dirname(os.path.abspath(__file__))
ADDRESS = re.compile(r" at 0x[0-9a-fA-F]+")


def executable_lines(code):
    lines = {line for _, _, line in code.co_lines() if line}
    for const in code.co_consts:
        if hasattr(const, "co_lines"):
            lines |= executable_lines(const)
    return lines


class LineRecorder:
    def __init__(self, filename):
        self.filename = filename
        self.hit = set()

    def global_trace(self, frame, event, arg):
        if frame.f_code.co_filename == self.filename:
            return self.local_trace
        return None

    def local_trace(self, frame, event, arg):
        if event == "line":
            self.hit.add(frame.f_lineno)
        return self.local_trace

    def start(self):
        sys.settrace(self.global_trace)

    def stop(self):
        sys.settrace(None)


def describe(exc, body_lines, test_file):
    text = str(exc)
    message = type(exc).__name__ + (": " + text if text else "")
    tb = exc.__traceback__
    failing_line = None
    while tb is not None:
        if tb.tb_frame.f_code.co_filename == test_file:
            lineno = tb.tb_lineno
            if 1 <= lineno <= len(body_lines):
                failing_line = body_lines[lineno - 1].strip()
        tb = tb.tb_next
    if failing_line:
        message += " [at: " + failing_line + "]"
    return ADDRESS.sub(" at 0x?", message)


def find_test_function(namespace, name):
    fn = namespace.get(name)
    if callable(fn):
        return fn
    return None


def run_test(test, base_namespace):
    body = test["body"]
    test_file = "<test " + test["id"] + ">"
    body_lines = body.splitlines()
    namespace = dict(base_namespace)
    try:
        exec(compile(body, test_file, "exec"), namespace)
    except BaseException as exc:  # noqa: BLE001 - any failure is a test error
        return "error", "definition failed: " + describe(exc, body_lines, test_file)
    fn = find_test_function(namespace, test["name"])
    if fn is None:
        added = [v for k, v in namespace.items()
                 if k.startswith("test") and k not in base_namespace and callable(v)]
        fn = added[0] if len(added) == 1 else None
    if fn is None:
        return "error", "no test function named " + test["name"]
    case = unittest.TestCase()
    try:
        if fn.__code__.co_argcount >= 1:
            fn(case)
        else:
            fn()
    except unittest.SkipTest as exc:
        return "fail", "skipped: " + str(exc)
    except case.failureException as exc:
        return "fail", describe(exc, body_lines, test_file)
    except BaseException as exc:  # noqa: BLE001
        return "error", describe(exc, body_lines, test_file)
    return "pass", None


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--suite", required=True)
    parser.add_argument("--report", required=True)
    parser.add_argument("--partial", required=True)
    parser.add_argument("--coverage", action="store_true")
    args = parser.parse_args()

    with open(args.suite, encoding="utf-8") as fh:
        suite = json.load(fh)
    tests = suite["tests"]
    module_name = suite["module"]
    source_path = os.path.join(HERE, suite["source_file"])
    sys.path.insert(0, HERE)

    results = []
    partial = open(args.partial, "w", encoding="utf-8")

    def emit(test, outcome, message):
        entry = {"id": test["id"], "name": test["name"], "outcome": outcome, "message": message}
        results.append(entry)
        partial.write(json.dumps(entry) + "\n")
        partial.flush()

    coverage = None
    recorder = LineRecorder(source_path)
    load_error = None
    try:
        with open(source_path, encoding="utf-8") as fh:
            source = fh.read()
        code = compile(source, source_path, "exec")
        executable = executable_lines(code)
        spec = importlib.util.spec_from_file_location(module_name, source_path)
        module = importlib.util.module_from_spec(spec)
        sys.modules[module_name] = module
        if args.coverage:
            recorder.start()
        try:
            exec(code, module.__dict__)
        finally:
            recorder.stop()
    except BaseException as exc:  # noqa: BLE001
        executable = None
        load_error = "load error: " + describe(exc, [], "")

    base_namespace = {"__name__": "specloop_suite"}
    if load_error is None:
        try:
            exec(compile("from " + module_name + " import *\n" + suite.get("preamble", ""),
                         "<preamble>", "exec"), base_namespace)
        except BaseException as exc:  # noqa: BLE001
            load_error = "preamble error: " + describe(exc, [], "")

    for test in tests:
        if load_error is not None:
            emit(test, "error", load_error)
            continue
        if args.coverage:
            recorder.start()
        try:
            outcome, message = run_test(test, base_namespace)
        finally:
            recorder.stop()
        emit(test, outcome, message)

    if args.coverage and executable:
        coverage = {"executable": len(executable), "executed": len(recorder.hit & executable)}

    report = {"tests": results}
    if coverage is not None:
        report["coverage"] = coverage
    if load_error is not None:
        report["load_error"] = load_error
    with open(args.report + ".tmp", "w", encoding="utf-8") as fh:
        json.dump(report, fh)
    os.replace(args.report + ".tmp", args.report)
    partial.close()
    failed = any(r["outcome"] != "pass" for r in results)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
