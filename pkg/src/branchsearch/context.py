"""Per-run bookkeeping around a shared gateway: call budget, token totals, trace."""

from __future__ import annotations

import threading
from typing import Callable, TypeVar

from .core import RunStats, SearchConfig, SearchError, Trace
from .gateway import ChatRequest, Gateway, Mode

T = TypeVar("T")


class BudgetExceeded(SearchError):
    code = "budget_exceeded"


class ParseError(SearchError, ValueError):
    """An LLM reply or text block does not match its expected format."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}{': ' + message if message else ''}")


class RunContext:
    """Everything one solve run shares: gateway, config, stats and trace.

    Completion calls go through :meth:`call`, which enforces
    ``config.llm_call_budget`` before contacting the gateway.
    """

    def __init__(self, gateway: Gateway, config: SearchConfig, trace: Trace | None = None):
        self.gateway = gateway
        self.config = config
        self.trace = trace if trace is not None else Trace(deterministic=gateway.mode is Mode.REPLAY)
        self.stats = RunStats()
        self._lock = threading.Lock()

    @property
    def model(self) -> str:
        return self.gateway.model

    @property
    def temperature(self) -> float:
        return self.config.temperature

    def call(self, request: ChatRequest) -> str:
        with self._lock:
            if self.stats.llm_calls >= self.config.llm_call_budget:
                raise BudgetExceeded(f"llm_call_budget={self.config.llm_call_budget} spent")
            self.stats.llm_calls += 1
        response = self.gateway.complete(request)
        with self._lock:
            self.stats.prompt_tokens += response.prompt_tokens
            self.stats.completion_tokens += response.completion_tokens
        return response.content

    def call_parsed(self, request: ChatRequest, parse: Callable[[str], T], hint: str) -> T:
        """Call, parse, and re-prompt up to ``config.retries`` times on :class:`ParseError`."""
        from .prompts import correction_request

        current = request
        for attempt in range(self.config.retries + 1):
            raw = self.call(current)
            try:
                return parse(raw)
            except ParseError as exc:
                if attempt == self.config.retries:
                    raise
                current = correction_request(request, raw, f"{exc.code}; {hint}")
        raise AssertionError("unreachable")


def as_context(llm: Gateway | RunContext, config: SearchConfig | None = None) -> RunContext:
    if isinstance(llm, RunContext):
        return llm
    from .core import validate_config

    return RunContext(llm, validate_config(config))
