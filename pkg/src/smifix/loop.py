"""Generic verify-and-retry correction loop over pluggable backends.

Each iteration asks the backend for a new candidate, verifies it with the
strict parser, and stops at the first valid string or after the iteration
budget. Backend crashes count as failed attempts; the loop never aborts.
Shipped backends: the grammar round-trip corrector, the grammar-edit
corrector, and a line-oriented external process for model-driven repair.
"""

from __future__ import annotations

import json
import selectors
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol

from .parser import ErrorClass, ParseError, classify_error, parse_strict
from .pipeline import correct_smiles
from .selfies import decode_string
from .valence import DEFAULT_TABLE, ValenceTable
from .writer import canonical_smiles


@dataclass(frozen=True)
class Feedback:
    valid: bool
    error_class: ErrorClass
    message: str

    def __post_init__(self) -> None:
        assert self.valid == (self.error_class is ErrorClass.VALID)


@dataclass(frozen=True)
class CorrectionRequest:
    description: str
    initial_candidate: str
    prompt_template: str = ""
    max_iterations: int = 1

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class LoopResult:
    final_candidate: str
    iterations_used: int
    succeeded: bool
    history: list[tuple[str, Feedback]] = field(default_factory=list)


class CorrectorBackend(Protocol):
    def propose(
        self,
        description: str,
        candidate: str,
        attempt: int,
        feedback: Feedback,
    ) -> str:
        """Return a replacement candidate for an invalid string."""


class BackendError(RuntimeError):
    """A backend failed to produce a candidate."""


def verify(candidate: str, table: ValenceTable = DEFAULT_TABLE) -> Feedback:
    """Strict-parser feedback for one candidate string."""
    try:
        parse_strict(candidate, table)
    except ParseError as exc:
        return Feedback(
            valid=False,
            error_class=exc.diagnostic.error_class,
            message=exc.diagnostic.message,
        )
    return Feedback(valid=True, error_class=ErrorClass.VALID, message="valid")


def run_loop(
    request: CorrectionRequest,
    backend: CorrectorBackend,
    table: ValenceTable = DEFAULT_TABLE,
) -> LoopResult:
    """Iterate propose -> verify, stopping at the first valid candidate.

    A backend exception is recorded in the history as a failed attempt with
    an empty candidate, and the loop moves on.
    """
    candidate = request.initial_candidate
    feedback = verify(candidate, table)
    history: list[tuple[str, Feedback]] = []
    for attempt in range(request.max_iterations):
        try:
            proposal = backend.propose(
                request.description, candidate, attempt, feedback
            )
        except Exception as exc:  # backend failure is a failed attempt
            proposal = ""
            new_feedback = Feedback(
                valid=False,
                error_class=ErrorClass.SYNTAX,
                message=f"backend failure: {exc}",
            )
        else:
            new_feedback = verify(proposal, table)
        history.append((proposal, new_feedback))
        candidate, feedback = proposal, new_feedback
        if feedback.valid:
            return LoopResult(
                final_candidate=candidate,
                iterations_used=attempt + 1,
                succeeded=True,
                history=history,
            )
    return LoopResult(
        final_candidate=candidate,
        iterations_used=request.max_iterations,
        succeeded=False,
        history=history,
    )


class RoundTripBackend:
    """Corrects by the lenient-parse / grammar round-trip pipeline."""

    def __init__(self, table: ValenceTable = DEFAULT_TABLE) -> None:
        self.table = table

    def propose(
        self, description: str, candidate: str, attempt: int, feedback: Feedback
    ) -> str:
        return correct_smiles(candidate, self.table).output


class GrammarEditBackend:
    """Treats the candidate as grammar-codec text, edits and decodes it."""

    def __init__(self, table: ValenceTable = DEFAULT_TABLE) -> None:
        self.table = table

    def propose(
        self, description: str, candidate: str, attempt: int, feedback: Feedback
    ) -> str:
        result = decode_string(candidate, self.table)
        if len(result.graph) == 0:
            return ""
        return canonical_smiles(result.graph)


class ExternalProcessBackend:
    """Line-oriented JSON protocol to a child process.

    One request per line on the child's standard input::

        {"description": ..., "invalid_smiles": ..., "attempt": ...,
         "error_class": ..., "message": ...}

    One response line on its standard output: ``{"smiles": ...}``.
    Non-JSON output, EOF, or a timeout is a failed attempt. Calls are
    serialized by default; pass ``concurrent_safe=True`` only when the
    child handles interleaved requests.
    """

    def __init__(
        self,
        argv: list[str],
        timeout: float = 60.0,
        concurrent_safe: bool = False,
    ) -> None:
        self.argv = list(argv)
        self.timeout = timeout
        self._lock = threading.Lock() if not concurrent_safe else None
        self._process: subprocess.Popen | None = None

    def _ensure_process(self) -> subprocess.Popen:
        if self._process is None or self._process.poll() is not None:
            self._process = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._process

    def propose(
        self, description: str, candidate: str, attempt: int, feedback: Feedback
    ) -> str:
        request = json.dumps(
            {
                "description": description,
                "invalid_smiles": candidate,
                "attempt": attempt,
                "error_class": feedback.error_class.value,
                "message": feedback.message,
            }
        )
        if self._lock is not None:
            with self._lock:
                return self._exchange(request)
        return self._exchange(request)

    def _exchange(self, request_line: str) -> str:
        process = self._ensure_process()
        assert process.stdin is not None and process.stdout is not None
        try:
            process.stdin.write(request_line + "\n")
            process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"external process write failed: {exc}") from exc
        line = self._read_line(process)
        try:
            payload = json.loads(line)
            smiles = payload["smiles"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise BackendError(f"bad response line {line!r}") from exc
        if not isinstance(smiles, str):
            raise BackendError("response smiles is not a string")
        return smiles

    def _read_line(self, process: subprocess.Popen) -> str:
        assert process.stdout is not None
        selector = selectors.DefaultSelector()
        selector.register(process.stdout, selectors.EVENT_READ)
        deadline = time.monotonic() + self.timeout
        buffer = ""
        try:
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise BackendError("external process timed out")
                if not selector.select(timeout=remaining):
                    continue
                chunk = process.stdout.readline()
                if chunk == "":
                    raise BackendError("external process closed its output")
                buffer += chunk
                if buffer.endswith("\n"):
                    return buffer.rstrip("\n")
        finally:
            selector.close()

    def close(self) -> None:
        if self._process is not None and self._process.poll() is None:
            try:
                assert self._process.stdin is not None
                self._process.stdin.close()
            except OSError:
                pass
            try:
                self._process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._process.kill()
        self._process = None

    def __enter__(self) -> "ExternalProcessBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class IdentityBackend:
    """Echoes the current candidate; useful for exhaustion tests."""

    def propose(
        self, description: str, candidate: str, attempt: int, feedback: Feedback
    ) -> str:
        return candidate


class ScriptedBackend:
    """Returns a fixed list of candidates in order; repeats the last one."""

    def __init__(self, candidates: list[str]) -> None:
        self.candidates = list(candidates)
        self.calls = 0

    def propose(
        self, description: str, candidate: str, attempt: int, feedback: Feedback
    ) -> str:
        index = min(self.calls, len(self.candidates) - 1)
        self.calls += 1
        return self.candidates[index]
