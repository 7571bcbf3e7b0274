"""Clients for the reasoning judge and the synthetic-narrative generator.

Both come in two flavours: an HTTP client speaking a chat-completion style
JSON protocol, and a deterministic offline stub.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

log = logging.getLogger(__name__)

JUDGE_PROMPT_VERSION = "judge-v1"

JUDGE_SYSTEM_PROMPT = """\
You grade the reasoning an analyst wrote while classifying a general aviation \
accident narrative into HFACS human-factors codes.

Rubric:
- good: the reasoning is logically coherent, cites concrete facts from the \
narrative, and those facts plausibly support human-factors conclusions.
- okay: the reasoning is on topic but vague, partly unsupported, or thin.
- bad: the reasoning is incoherent, irrelevant to the narrative, or empty.

Answer with exactly one word: bad, okay, or good."""


class GatewayError(RuntimeError):
    pass


class JudgeUnavailable(GatewayError):
    pass


class GenerationFailed(GatewayError):
    pass


class EmptyResponse(GenerationFailed):
    pass


class Grade(enum.Enum):
    BAD = "bad"
    OKAY = "okay"
    GOOD = "good"


GRADE_SCORES = {Grade.BAD: 0.0, Grade.OKAY: 0.25, Grade.GOOD: 0.5}


@dataclass(frozen=True)
class JudgeVerdict:
    grade: Grade

    @property
    def score(self) -> float:
        return GRADE_SCORES[self.grade]


class JudgeClient(Protocol):
    def evaluate(self, reasoning_text: str, narrative: str) -> JudgeVerdict: ...


class GeneratorClient(Protocol):
    def complete(self, prompt: str) -> str: ...


def parse_grade(text: str) -> Grade:
    word = text.strip().strip(".!\"'").lower()
    try:
        return Grade(word)
    except ValueError:
        log.warning("unparseable judge response %r, grading as bad", text[:80])
        return Grade.BAD


# --- stubs -----------------------------------------------------------------

@dataclass
class StubJudge:
    """Rule-based judge: good iff long enough and it cites a keyword that the
    narrative also contains; okay iff merely long enough; bad otherwise."""

    keywords: dict[str, str]
    min_length: int = 20
    calls: int = field(default=0, compare=False)

    def evaluate(self, reasoning_text: str, narrative: str) -> JudgeVerdict:
        self.calls += 1
        text = reasoning_text.strip()
        if len(text) < self.min_length:
            return JudgeVerdict(Grade.BAD)
        said = set(text.lower().split())
        seen = set(narrative.lower().split())
        if any(kw in said and kw in seen for kw in self.keywords.values()):
            return JudgeVerdict(Grade.GOOD)
        return JudgeVerdict(Grade.OKAY)


def judge_stub(rules: dict | None = None) -> StubJudge:
    from .toy_task import CODE_KEYWORDS

    rules = dict(rules or {})
    return StubJudge(keywords=rules.get("keywords", CODE_KEYWORDS), min_length=rules.get("min_length", 20))


_TARGET_LINE = re.compile(r"^Target code: ([A-Z]{2}[0-9]{3})", re.MULTILINE)


@dataclass
class StubGenerator:
    """Returns a narrative seeded by the prompt digest, containing the target
    code's keyword. Identical prompts give identical text."""

    keywords: dict[str, str] | None = None
    calls: int = field(default=0, compare=False)

    def complete(self, prompt: str) -> str:
        from .toy_task import CODE_KEYWORDS, NEUTRAL_WORDS

        self.calls += 1
        keywords = self.keywords or CODE_KEYWORDS
        m = _TARGET_LINE.search(prompt)
        if m is None or m.group(1) not in keywords:
            raise GenerationFailed("stub generator needs a 'Target code:' line")
        seed = int.from_bytes(hashlib.sha256(prompt.encode()).digest()[:8], "big")
        rng = random.Random(seed)
        words = [rng.choice(NEUTRAL_WORDS) for _ in range(12)]
        words.insert(rng.randrange(len(words) + 1), keywords[m.group(1)])
        return " ".join(words)


# --- HTTP ------------------------------------------------------------------

class TokenBucket:
    """Blocking token-bucket limiter, ``rate`` tokens per minute."""

    def __init__(self, rate_per_minute: float, capacity: float | None = None,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.rate = rate_per_minute / 60.0
        self.capacity = capacity if capacity is not None else max(1.0, rate_per_minute / 60.0)
        self.tokens = self.capacity
        self.clock = clock
        self.sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.rate)
                self._last = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleep(wait)


@dataclass
class GatewayConfig:
    url: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-5-nano"
    api_key_env: str = "HFACS_GATEWAY_API_KEY"
    timeout: float = 30.0
    retry_budget: int = 3
    backoff_base: float = 1.0
    backoff_jitter: float = 0.25
    requests_per_minute: float = 0.0  # 0 disables rate limiting


class ChatClient:
    """POSTs chat-completion requests with jittered exponential backoff.

    Retries transport errors, timeouts, 429 and 5xx. Other 4xx responses fail
    at once. A persistent failure makes exactly ``retry_budget + 1`` attempts.
    """

    error_cls: type[GatewayError] = GatewayError

    def __init__(self, config: GatewayConfig, http: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep, rng: random.Random | None = None):
        self.config = config
        self.http = http or httpx.Client(timeout=config.timeout)
        self.sleep = sleep
        self.rng = rng or random.Random()
        self.limiter = TokenBucket(config.requests_per_minute) if config.requests_per_minute > 0 else None
        self.attempts = 0

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def chat(self, messages: list[dict[str, str]], **extra) -> str:
        body = {"model": self.config.model, "messages": messages, **extra}
        last: Exception | None = None
        for attempt in range(self.config.retry_budget + 1):
            if attempt:
                delay = self.config.backoff_base * 2 ** (attempt - 1)
                self.sleep(delay * (1.0 + self.config.backoff_jitter * self.rng.random()))
            if self.limiter is not None:
                self.limiter.acquire()
            self.attempts += 1
            try:
                resp = self.http.post(self.config.url, json=body, headers=self._headers(),
                                      timeout=self.config.timeout)
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = GatewayError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise self.error_cls(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise self.error_cls(f"malformed response body: {exc}") from exc
        raise self.error_cls(f"gave up after {self.config.retry_budget + 1} attempts: {last}")


class HttpJudge(ChatClient):
    error_cls = JudgeUnavailable

    def evaluate(self, reasoning_text: str, narrative: str) -> JudgeVerdict:
        user = f"Accident narrative:\n{narrative}\n\nReasoning to grade:\n{reasoning_text}"
        text = self.chat(
            [{"role": "system", "content": JUDGE_SYSTEM_PROMPT}, {"role": "user", "content": user}],
            max_tokens=2,
        )
        return JudgeVerdict(parse_grade(text))


class HttpGenerator(ChatClient):
    error_cls = GenerationFailed

    def complete(self, prompt: str) -> str:
        text = self.chat([{"role": "user", "content": prompt}])
        if not text.strip():
            raise EmptyResponse("generator returned empty text")
        return text.strip()
