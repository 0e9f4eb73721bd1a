"""HTTP chat-completions client.

Targets the common chat-completions wire shape with a configurable base URL.
The API key is read from an environment variable (default ``FOT_API_KEY``);
429 and 5xx responses are retried with exponential backoff.
"""

from __future__ import annotations

import json
import os
import threading
import time
import urllib.error
import urllib.request

from fot.backends.base import GenRequest, GenResponse, PriceTable, count_tokens
from fot.errors import HttpBackendError

_RETRY_STATUSES = {429, 500, 502, 503, 504}


class HttpBackend:
    def __init__(
        self,
        base_url: str,
        model: str,
        price_table: PriceTable | None = None,
        api_key_env: str = "FOT_API_KEY",
        timeout_s: float = 120.0,
        max_retries: int = 3,
        backoff_s: float = 0.5,
        max_in_flight: int = 8,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.price_table = price_table or PriceTable()
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.namespace = f"http:{model}"
        self._sem = threading.Semaphore(max_in_flight)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, body: dict) -> dict:
        data = json.dumps(body).encode("utf-8")
        request = urllib.request.Request(
            f"{self.base_url}/chat/completions",
            data=data,
            headers=self._headers(),
            method="POST",
        )
        last_err: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                with urllib.request.urlopen(request, timeout=self.timeout_s) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except urllib.error.HTTPError as err:
                last_err = HttpBackendError(f"HTTP {err.code}: {err.reason}", status=err.code)
                if err.code not in _RETRY_STATUSES or attempt == self.max_retries:
                    raise last_err from err
            except urllib.error.URLError as err:
                last_err = HttpBackendError(f"connection error: {err.reason}")
                if attempt == self.max_retries:
                    raise last_err from err
            time.sleep(self.backoff_s * (2**attempt))
        raise last_err  # pragma: no cover

    def generate(self, req: GenRequest) -> GenResponse:
        body = {
            "model": self.model,
            "messages": [{"role": role, "content": content} for role, content in req.messages],
            "temperature": req.temperature,
            "n": req.n,
        }
        if req.max_tokens is not None:
            body["max_tokens"] = req.max_tokens
        if req.want_logprobs:
            body["logprobs"] = True
        started = time.perf_counter()
        with self._sem:
            doc = self._post(body)
        latency_ms = int((time.perf_counter() - started) * 1000)

        choices = doc.get("choices", [])
        if len(choices) < req.n:
            raise HttpBackendError(f"expected {req.n} choices, got {len(choices)}")
        texts = tuple(c.get("message", {}).get("content", "") for c in choices[: req.n])
        usage = doc.get("usage", {})
        prompt_tokens = int(usage.get("prompt_tokens", count_tokens(req.prompt_text())))
        completion_tokens = int(
            usage.get("completion_tokens", sum(count_tokens(t) for t in texts))
        )
        logprobs = None
        if req.want_logprobs:
            raw = [c.get("logprobs") for c in choices[: req.n]]
            logprobs = tuple(json.dumps(lp, sort_keys=True) if lp else "" for lp in raw)
        return GenResponse(
            texts=texts,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            cost_usd=self.price_table.cost(prompt_tokens, completion_tokens),
            latency_ms=latency_ms,
            logprobs=logprobs,
        )
