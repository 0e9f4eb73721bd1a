"""Operation contract and the built-in operation kinds.

An operation kind is a function ``(node, inputs, ctx) -> OpResult`` looked up
in a string-keyed registry. Kinds talk to the backend exclusively through
``ctx.generate``, which handles caching, cost accounting, and budget checks.

Payload conventions: metric and metadata keys are prefixed with an underscore
("_value" holds a thought's numeric value); a payload of ``{"_dead": true}``
marks a dropped candidate that downstream kinds silently skip.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable

from fot import go24
from fot.backends.base import GenRequest, GenResponse, ThoughtGenerator, prompt_hash
from fot.cache import CacheEntry, CacheFacade, CacheKey
from fot.canonical import canonical_bytes, value_hash
from fot.errors import BudgetExceededError, ConfigError, MalformedInputError
from fot.graph.model import Connection, ExecutionGraph, MutationBatch, OperationNode, Thought

DEFAULT_VALUE_MAP = {"sure": 20.0, "likely": 1.0, "impossible": 0.001, "default": 0.0}

CODE_VERSION = "1"


# -- templates -----------------------------------------------------------------

_SLOT = re.compile(r"\{([a-z_][a-z0-9_]*)\}")
_template_cache: dict[str, str] = {}


def load_template(name: str) -> str:
    if name not in _template_cache:
        _template_cache[name] = (
            resources.files("fot").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")
        )
    return _template_cache[name]


def render_template(text: str, variables: dict[str, Any]) -> str:
    """Substitute ``{name}`` slots; unknown slots and other braces are left alone."""

    def sub(match: re.Match) -> str:
        name = match.group(1)
        if name in variables:
            return str(variables[name])
        return match.group(0)

    return _SLOT.sub(sub, text)


def template_messages(template: str, variables: dict[str, Any]) -> tuple[tuple[str, str], ...]:
    """Split a template into (role, content) messages on SYSTEM:/USER: markers."""
    rendered = render_template(template, variables)
    messages: list[tuple[str, str]] = []
    role = None
    buffer: list[str] = []
    for line in rendered.splitlines():
        marker = line.strip().lower().rstrip(":")
        if line.strip() in ("SYSTEM:", "USER:") and marker in ("system", "user"):
            if role is not None:
                messages.append((role, "\n".join(buffer).strip("\n")))
            role = marker
            buffer = []
        else:
            buffer.append(line)
    if role is None:
        return (("user", rendered.strip("\n")),)
    messages.append((role, "\n".join(buffer).strip("\n")))
    return tuple(messages)


def prompt_messages(config: dict, variables: dict[str, Any]) -> tuple[tuple[str, str], ...]:
    if "prompt_text" in config:
        return template_messages(config["prompt_text"], variables)
    if "prompt" in config:
        return template_messages(load_template(config["prompt"]), variables)
    raise ConfigError("operation config needs 'prompt' or 'prompt_text'")


# -- dead candidates -------------------------------------------------------------

def dead_value(reason: str = "") -> dict:
    return {"_dead": True, "reason": reason}


def is_dead(value: Any) -> bool:
    return isinstance(value, dict) and bool(value.get("_dead"))


def live_inputs(inputs: list[Thought]) -> list[Thought]:
    return [t for t in inputs if not is_dead(t.value)]


# -- execution context -----------------------------------------------------------

def derive_rng_seed(run_seed: int, op_id: str) -> int:
    """Pure 64-bit function of (run seed, op id); stable across re-runs."""
    return int(value_hash([run_seed, op_id])[:16], 16)


@dataclass
class OpContext:
    run_seed: int
    op_id: str
    backend: ThoughtGenerator | None = None
    cache: CacheFacade | None = None
    hyperparams: dict = field(default_factory=dict)
    graph_view: ExecutionGraph | None = None
    clock_now: Callable[[], float] = lambda: 0.0
    budget_usd: float | None = None
    charge: Callable[[float], float] | None = None

    cost_usd: float = 0.0
    duration_ms: int = 0
    backend_calls: int = 0
    cache_lookups: int = 0
    cache_hits: int = 0
    _op_serial: int = 0
    _conn_serial: int = 0

    @property
    def rng_seed(self) -> int:
        return derive_rng_seed(self.run_seed, self.op_id)

    def new_op_id(self, kind: str) -> str:
        serial = self._op_serial
        self._op_serial += 1
        return f"{self.op_id}/{serial}#{kind}"

    def new_conn_id(self) -> str:
        serial = self._conn_serial
        self._conn_serial += 1
        return f"{self.op_id}/c{serial}"

    def generate(
        self,
        messages: tuple[tuple[str, str], ...],
        ordinal: int = 0,
        temperature: float = 0.0,
        max_tokens: int | None = None,
        cache_extra: dict | None = None,
    ) -> str:
        """One completion, memoized per (call fingerprint, prompt, ordinal).

        Sample-count style configuration must stay out of ``cache_extra`` so
        that sample indices remain prefix-stable.
        """
        if self.backend is None:
            raise ConfigError(f"operation {self.op_id} needs a backend")
        key = CacheKey(
            fingerprint=value_hash(
                {
                    "schema": "fot.call/1",
                    "backend": getattr(self.backend, "namespace", "?"),
                    "temperature": temperature,
                    "max_tokens": max_tokens,
                    "extra": cache_extra or {},
                    "code_version": CODE_VERSION,
                }
            ),
            inputs_hash=prompt_hash(messages),
            sample_index=ordinal,
        )
        if self.cache is not None and self.cache.tier != "none":
            self.cache_lookups += 1
            entry = self.cache.lookup(key)
            if entry is not None:
                self.cache_hits += 1
                return entry.outputs["text"]

        req = GenRequest(
            messages=messages, temperature=temperature, n=1,
            max_tokens=max_tokens, ordinal=ordinal,
        )
        resp: GenResponse = self.backend.generate(req)
        self.backend_calls += 1
        self.cost_usd += resp.cost_usd
        self.duration_ms += resp.latency_ms
        if self.charge is not None:
            total = self.charge(resp.cost_usd)
            if self.budget_usd is not None and total > self.budget_usd:
                raise BudgetExceededError(
                    f"run cost {total:.4f} USD exceeds budget {self.budget_usd:.4f} USD"
                )
        if self.cache is not None and self.cache.tier != "none":
            self.cache.store(
                key,
                CacheEntry(
                    key=key,
                    outputs={"text": resp.texts[0]},
                    cost_usd=resp.cost_usd,
                    duration_ms=resp.latency_ms,
                    created_at=self.clock_now(),
                    backend_id=getattr(self.backend, "namespace", "?"),
                ),
            )
        return resp.texts[0]


@dataclass
class OpResult:
    outputs: dict[str, Any]
    mutation: MutationBatch | None = None
    cost_usd: float = 0.0
    duration_ms: int = 0
    cache_hit: bool = False


@dataclass(frozen=True)
class OpFingerprint:
    kind: str
    config_hash: str
    code_version: str = CODE_VERSION

    def hash(self) -> str:
        return value_hash([self.kind, self.config_hash, self.code_version])

    @classmethod
    def of(cls, node: OperationNode) -> "OpFingerprint":
        return cls(kind=node.kind, config_hash=value_hash(node.config))


# -- registry ---------------------------------------------------------------------

KindFn = Callable[[OperationNode, list[Thought], OpContext], OpResult]

_REGISTRY: dict[str, KindFn] = {}
_REGISTRY_LOCK = threading.Lock()


def register_kind(name: str) -> Callable[[KindFn], KindFn]:
    def wrap(fn: KindFn) -> KindFn:
        with _REGISTRY_LOCK:
            if name in _REGISTRY and _REGISTRY[name] is not fn:
                raise ConfigError(f"operation kind {name!r} already registered")
            _REGISTRY[name] = fn
        return fn

    return wrap


def kind_exists(name: str) -> bool:
    return name in _REGISTRY


def execute_op(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """Run one operation; deterministic given (inputs, config, rng_seed, backend)."""
    fn = _REGISTRY.get(node.kind)
    if fn is None:
        raise ConfigError(f"unknown operation kind {node.kind!r}")
    result = fn(node, inputs, ctx)
    missing = [p for p in node.output_ports if p not in result.outputs]
    if missing:
        raise MalformedInputError(f"{node.id} produced no value for ports {missing}")
    result.cost_usd += ctx.cost_usd
    result.duration_ms += ctx.duration_ms
    result.cache_hit = ctx.cache_lookups > 0 and ctx.cache_hits == ctx.cache_lookups
    return result


# -- parsers -----------------------------------------------------------------------

_LABELS = ("sure", "likely", "impossible")
_LIST_RE = re.compile(r"\[([^\[\]]*)\]")


def parse_label(text: str) -> str | None:
    """First match wins among the known labels, case-insensitive."""
    lowered = text.lower()
    hits = [(lowered.find(lbl), lbl) for lbl in _LABELS if lbl in lowered]
    if not hits:
        return None
    return min(hits)[1]


def parse_digit_list(text: str) -> list[int] | None:
    """Last bracketed integer list in the text; lenient about separators."""
    best = None
    for match in _LIST_RE.finditer(text):
        try:
            best = [int(tok) for tok in match.group(1).replace(",", " ").split()]
        except ValueError:
            continue
    return best


_GO24_STEP = re.compile(
    r"(?P<expr>-?\d+(?:/\d+)?\s+[+\-*/×÷]\s+-?\d+(?:/\d+)?\s*=\s*-?\d+(?:/\d+)?)"
    r"\s*\(left:\s*(?P<left>[^)]*)\)"
)


def parse_go24_step(text: str, state: dict) -> dict | None:
    """Parse one 'expr = value (left: ...)' proposal line into a new state."""
    match = _GO24_STEP.search(text)
    if not match:
        return None
    step = match.group("expr").strip()
    try:
        left = [go24.fmt_number(go24.parse_number(tok)) for tok in match.group("left").split()]
    except ValueError:
        return None
    if not left:
        return None
    return {
        "numbers": state.get("numbers", []),
        "steps": list(state.get("steps", [])) + [step],
        "left": left,
    }


# -- built-in kinds -------------------------------------------------------------------


@register_kind("input")
def op_input(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    return OpResult(outputs={"out": node.config.get("value")})


@register_kind("identity")
def op_identity(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    if not inputs:
        raise MalformedInputError(f"{node.id}: identity needs one input")
    return OpResult(outputs={"out": inputs[0].value})


@register_kind("generate")
def op_generate(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """n completions of a prompt template; one list thought or n fan-out ports."""
    cfg = node.config
    n = int(cfg.get("n", 1))
    if n < 1:
        raise ConfigError(f"{node.id}: generate needs n >= 1")
    temperature = float(cfg.get("temperature", 1.0))
    variables = dict(cfg.get("vars", {}))
    if inputs:
        first = inputs[0].value
        if isinstance(first, dict):
            variables.update({k: v for k, v in first.items() if not k.startswith("_")})
        variables.setdefault("input", first if isinstance(first, str) else canonical_bytes(first).decode())
    if is_dead(variables.get("input")) or (inputs and is_dead(inputs[0].value)):
        payloads = [dead_value("dead input")] * n
    else:
        messages = prompt_messages(cfg, variables)
        payloads = []
        for i in range(n):
            text = ctx.generate(messages, ordinal=i, temperature=temperature)
            payloads.append(text)
    if cfg.get("fanout", False):
        return OpResult(outputs={f"t{i}": payloads[i] for i in range(n)})
    return OpResult(outputs={"out": payloads if n > 1 else payloads[0]})


@register_kind("score")
def op_score(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """Sample a classification num_samples times and sum the mapped values."""
    cfg = node.config
    num_samples = int(cfg.get("num_samples", 1))
    if num_samples < 1:
        raise ConfigError(f"{node.id}: score needs num_samples >= 1")
    base = int(cfg.get("sample_base", 0))
    value_map = {**DEFAULT_VALUE_MAP, **cfg.get("value_map", {})}
    if not inputs or is_dead(inputs[0].value):
        return OpResult(outputs={"out": dead_value("dead input")})
    state = inputs[0].value
    variables = dict(cfg.get("vars", {}))
    if isinstance(state, dict):
        variables.update({k: v for k, v in state.items() if not k.startswith("_")})
    messages = prompt_messages(cfg, variables)
    total = 0.0
    for s in range(num_samples):
        text = ctx.generate(messages, ordinal=base + s, temperature=float(cfg.get("temperature", 0.0)))
        label = parse_label(text)
        total += value_map[label] if label is not None else value_map["default"]
    payload = dict(state) if isinstance(state, dict) else {"value": state}
    payload["_value"] = total
    return OpResult(outputs={"out": payload})


def _group_key(payload: dict) -> bytes:
    return canonical_bytes({k: v for k, v in payload.items() if not k.startswith("_")})


@register_kind("filter_keep_top")
def op_filter_keep_top(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """Keep the k highest-valued inputs, emitted in input order (the kept set
    is a subsequence of the input order; ties select earlier inputs).

    With ``aggregate_samples`` the inputs are grouped by their payload minus
    underscore keys and each group's values are summed before ranking, so
    per-sample score thoughts for one candidate act as a single entry.
    """
    cfg = node.config
    k = int(cfg["k"])
    if k < 1:
        raise ConfigError(f"{node.id}: filter needs k >= 1")
    candidates: list[tuple[float, dict]] = []
    if cfg.get("aggregate_samples", False):
        groups: dict[bytes, dict] = {}
        order: list[bytes] = []
        for t in live_inputs(inputs):
            value = t.value
            if not isinstance(value, dict) or "_value" not in value:
                continue
            key = _group_key(value)
            if key not in groups:
                groups[key] = {**{k2: v for k2, v in value.items() if not k2.startswith("_")}, "_value": 0.0}
                order.append(key)
            groups[key]["_value"] += float(value["_value"])
        candidates = [(groups[key]["_value"], groups[key]) for key in order]
    else:
        for t in live_inputs(inputs):
            value = t.value
            if not isinstance(value, dict) or "_value" not in value:
                continue
            candidates.append((float(value["_value"]), value))
    ranked = sorted(range(len(candidates)), key=lambda i: (-candidates[i][0], i))
    kept_indices = sorted(ranked[:k])
    kept = [candidates[i][1] for i in kept_indices]
    outputs = {}
    for i in range(k):
        outputs[f"top{i}"] = kept[i] if i < len(kept) else dead_value("fewer candidates than k")
    return OpResult(outputs=outputs)


@register_kind("split")
def op_split(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """Deterministic partition of a list payload into near-equal contiguous chunks."""
    n_parts = int(node.config["n_parts"])
    if not inputs:
        raise MalformedInputError(f"{node.id}: split needs one input")
    value = inputs[0].value
    items = value.get("list") if isinstance(value, dict) else value
    if not isinstance(items, list):
        raise MalformedInputError(f"{node.id}: split expects a list payload")
    size, extra = divmod(len(items), n_parts)
    outputs = {}
    pos = 0
    for i in range(n_parts):
        take = size + (1 if i < extra else 0)
        chunk = items[pos : pos + take]
        pos += take
        outputs[f"part{i}"] = {"list": chunk, "_ref": chunk}
    return OpResult(outputs=outputs)


@register_kind("aggregate")
def op_aggregate(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """Merge exactly two list payloads into one via a backend call."""
    cfg = node.config
    live = live_inputs(inputs)
    if len(live) != 2:
        if len(inputs) == 2 and len(live) < 2 and live:
            return OpResult(outputs={"out": live[0].value})
        if not live:
            return OpResult(outputs={"out": dead_value("no live inputs")})
        raise MalformedInputError(f"{node.id}: aggregate needs exactly 2 inputs, got {len(inputs)}")
    a, b = live[0].value, live[1].value
    if not (isinstance(a, dict) and isinstance(b, dict) and "list" in a and "list" in b):
        raise MalformedInputError(f"{node.id}: aggregate expects list payloads")
    ref = list(a.get("_ref", a["list"])) + list(b.get("_ref", b["list"]))
    variables = {
        "input1": _render_list(a["list"]),
        "input2": _render_list(b["list"]),
        "half_length": len(a["list"]),
        "total_length": len(a["list"]) + len(b["list"]),
        **cfg.get("vars", {}),
    }
    text = ctx.generate(
        prompt_messages(cfg, variables),
        ordinal=int(cfg.get("sample_base", 0)),
        temperature=float(cfg.get("temperature", 1.0)),
    )
    merged = parse_digit_list(text)
    if merged is None:
        return OpResult(outputs={"out": dead_value("unparseable merge output")})
    return OpResult(outputs={"out": {"list": merged, "_ref": ref}})


@register_kind("improve")
def op_improve(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """``rounds`` sequential backend refinements of a list payload; 0 = identity."""
    cfg = node.config
    rounds = int(cfg.get("rounds", 1))
    if not inputs:
        raise MalformedInputError(f"{node.id}: improve needs one input")
    value = inputs[0].value
    if is_dead(value):
        return OpResult(outputs={"out": value})
    if not (isinstance(value, dict) and "list" in value):
        raise MalformedInputError(f"{node.id}: improve expects a list payload")
    current = list(value["list"])
    ref = list(value.get("_ref", current))
    base = int(cfg.get("sample_base", 0))
    for r in range(rounds):
        variables = {
            "input_list": _render_list(ref),
            "incorrectly_sorted": _render_list(current),
            "length": len(ref),
            **cfg.get("vars", {}),
        }
        text = ctx.generate(
            prompt_messages(cfg, variables),
            ordinal=base + r,
            temperature=float(cfg.get("temperature", 1.0)),
        )
        improved = parse_digit_list(text)
        if improved is not None:
            current = improved
    return OpResult(outputs={"out": {"list": current, "_ref": ref}})


def _render_list(items: list) -> str:
    return "[" + ", ".join(str(v) for v in items) + "]"


# -- dynamic growth --------------------------------------------------------------


def parse_plan(text: str) -> list[dict] | None:
    """Lenient plan parse: a JSON object with "subquestions" holding strings or
    {"q", "decompose"} items. Returns None when nothing usable is found."""
    import json

    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        return None
    try:
        doc = json.loads(text[start : end + 1])
    except ValueError:
        return None
    raw = doc.get("subquestions")
    if not isinstance(raw, list):
        return None
    items = []
    for entry in raw:
        if isinstance(entry, str):
            items.append({"q": entry, "decompose": False})
        elif isinstance(entry, dict) and isinstance(entry.get("q"), str):
            items.append({"q": entry["q"], "decompose": bool(entry.get("decompose", False))})
    return items


@register_kind("expand")
def op_expand(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """Dynamic graph growth: ask the backend for a subquestion plan and emit a
    batch adding one child per item plus a join; the actor's existing outgoing
    connections are re-sourced onto the join so downstream consumers receive
    the joined answer. Unusable plans fall back to a single passthrough child.
    """
    cfg = node.config
    question = cfg.get("question")
    if question is None and inputs and isinstance(inputs[0].value, dict):
        question = inputs[0].value.get("question")
    if question is None:
        raise MalformedInputError(f"{node.id}: expand needs a question")

    plan: list[dict] | None
    if "plan" in cfg:
        plan = [
            item if isinstance(item, dict) else {"q": item, "decompose": False}
            for item in cfg["plan"]
        ]
    else:
        text = ctx.generate(
            prompt_messages(cfg, {"question": question}),
            ordinal=0,
            temperature=float(cfg.get("temperature", 0.0)),
        )
        plan = parse_plan(text)

    child_kind = cfg.get("child_kind", "identity")
    expand_kind = cfg.get("expand_kind", node.kind)
    join_kind = cfg.get("join_kind", "join")
    passthrough_kind = cfg.get("passthrough_kind", "identity")
    child_config = dict(cfg.get("child_config", {}))

    batch = MutationBatch(actor=node.id)
    outputs: dict[str, Any] = {"out": {"question": question, "plan": plan or []}}

    if not plan:
        child_id = ctx.new_op_id(passthrough_kind)
        batch.add_ops.append(
            OperationNode(
                id=child_id, kind=passthrough_kind, config=dict(child_config),
                input_ports=("question",), output_ports=("out",),
            )
        )
        batch.add_conns.append(
            Connection(id=ctx.new_conn_id(), source=(node.id, "q0"), target=(child_id, "question"))
        )
        outputs["q0"] = {"question": question}
        joined_source = (child_id, "out")
    else:
        join_id = ctx.new_op_id(join_kind)
        child_ids = []
        for i, item in enumerate(plan):
            if item.get("decompose"):
                kind = expand_kind
                config = {k: v for k, v in cfg.items() if k not in ("question", "plan")}
            else:
                kind = child_kind
                config = dict(child_config)
            child_id = ctx.new_op_id(kind)
            child_ids.append(child_id)
            batch.add_ops.append(
                OperationNode(
                    id=child_id, kind=kind, config=config,
                    input_ports=("question",), output_ports=("out",),
                )
            )
            batch.add_conns.append(
                Connection(id=ctx.new_conn_id(), source=(node.id, f"q{i}"), target=(child_id, "question"))
            )
            outputs[f"q{i}"] = {"question": item["q"]}
        batch.add_ops.append(
            OperationNode(
                id=join_id, kind=join_kind,
                config={"question": question, **cfg.get("join_config", {})},
                input_ports=("in",), output_ports=("out",),
            )
        )
        for child_id in child_ids:
            batch.add_conns.append(
                Connection(id=ctx.new_conn_id(), source=(child_id, "out"), target=(join_id, "in"))
            )
        joined_source = (join_id, "out")

    if ctx.graph_view is not None:
        for conn in ctx.graph_view.outgoing(node.id):
            batch.rewire.append((conn.id, joined_source))

    return OpResult(outputs=outputs, mutation=batch)


@register_kind("join")
def op_join(node: OperationNode, inputs: list[Thought], ctx: OpContext) -> OpResult:
    """Deterministic bottom-up aggregation of child answers."""
    answers = []
    for t in inputs:
        value = t.value
        if is_dead(value):
            continue
        if isinstance(value, dict):
            answers.append(str(value.get("answer", value.get("question", ""))))
        else:
            answers.append(str(value))
    return OpResult(
        outputs={
            "out": {
                "question": node.config.get("question", ""),
                "answer": "; ".join(answers),
                "answers": answers,
            }
        }
    )
