"""Attention policy over planning-graph observations.

A shared encoder runs L rounds of single-head scaled-dot-product attention,
each restricted to graph neighbors plus self, with residual connections,
layer norm, and a feed-forward block. The decoder cross-attends from the
robot's current vertex over the whole graph, concatenates and projects to an
enhanced current feature, and scores each move candidate through a
tanh-clipped pointer head; a small value head reads the same enhanced
feature for the training baseline.

Weights persist as a one-line ASCII header (format version, width, layer
count, candidate cap) followed by raw little-endian float32 arrays in the
order given by ``PolicyNet.parameter_order``; round-trips are bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import ContractViolationError, WeightsFormatError

_MAGIC = "MRXPOLICY"
_FORMAT_VERSION = 1
PTR_CLIP = 10.0


@dataclass
class PolicyOutput:
    """Action distribution over candidate slots (masked slots get 0) plus a
    state-value estimate."""

    probs: np.ndarray
    value: float


class EncoderLayer(nn.Module):
    def __init__(self, d: int):
        super().__init__()
        self.wq = nn.Linear(d, d, bias=False)
        self.wk = nn.Linear(d, d, bias=False)
        self.wv = nn.Linear(d, d, bias=False)
        self.ff1 = nn.Linear(d, 4 * d)
        self.ff2 = nn.Linear(4 * d, d)
        self.ln1 = nn.LayerNorm(d)
        self.ln2 = nn.LayerNorm(d)
        self.scale = math.sqrt(d)

    def forward(self, h: torch.Tensor, allow: torch.Tensor) -> torch.Tensor:
        q, k, v = self.wq(h), self.wk(h), self.wv(h)
        scores = q @ k.transpose(0, 1) / self.scale
        scores = scores.masked_fill(~allow, float("-inf"))
        h = self.ln1(h + torch.softmax(scores, dim=-1) @ v)
        h = self.ln2(h + self.ff2(torch.relu(self.ff1(h))))
        return h


class PolicyNet(nn.Module):
    """Encoder-decoder policy. ``k`` is the candidate cap it was built for
    (recorded in the weights header; the forward pass itself handles any
    candidate count)."""

    FEATURES = 6  # x, y, utility, guidepost, indicator, surplus

    def __init__(self, d: int = 64, layers: int = 3, k: int = 8, seed: int = 0):
        super().__init__()
        if d < 8:
            raise ContractViolationError(f"embedding width must be >= 8, got {d}")
        if layers < 1:
            raise ContractViolationError(f"need >= 1 encoder layer, got {layers}")
        self.d = d
        self.layers = layers
        self.k = k
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.input_proj = nn.Linear(self.FEATURES, d)
            self.encoder = nn.ModuleList(EncoderLayer(d) for _ in range(layers))
            self.dec_wq = nn.Linear(d, d, bias=False)
            self.dec_wk = nn.Linear(d, d, bias=False)
            self.dec_wv = nn.Linear(d, d, bias=False)
            self.combine = nn.Linear(2 * d, d)
            self.ptr_q = nn.Linear(d, d, bias=False)
            self.ptr_k = nn.Linear(d, d, bias=False)
            self.value_head = nn.Linear(d, 1)

    # -- forward -------------------------------------------------------------

    def encode(self, features: torch.Tensor, edges: torch.Tensor) -> torch.Tensor:
        """Per-vertex embeddings; attention restricted to neighbors + self."""
        if not torch.isfinite(features).all():
            raise ContractViolationError("non-finite observation features")
        n = features.shape[0]
        allow = torch.eye(n, dtype=torch.bool)
        if edges.numel():
            allow[edges[:, 0], edges[:, 1]] = True
            allow[edges[:, 1], edges[:, 0]] = True
        h = self.input_proj(features)
        for layer in self.encoder:
            h = layer(h, allow)
        return h

    def decode(self, h: torch.Tensor, current: int, cand_rows: torch.Tensor,
               mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Candidate log-probabilities (masked slots -inf) and state value."""
        if not bool(mask.any()):
            raise ContractViolationError("all action candidates masked")
        hc = h[current:current + 1]
        q = self.dec_wq(hc)
        keys = self.dec_wk(h)
        vals = self.dec_wv(h)
        attn = torch.softmax(q @ keys.transpose(0, 1) / math.sqrt(self.d), dim=-1)
        enhanced = self.combine(torch.cat([hc, attn @ vals], dim=-1))

        safe_rows = cand_rows.clamp(min=0)
        pq = self.ptr_q(enhanced)
        pk = self.ptr_k(h[safe_rows])
        logits = PTR_CLIP * torch.tanh(
            (pk @ pq.transpose(0, 1)).squeeze(-1) / math.sqrt(self.d))
        logits = logits.masked_fill(~mask, float("-inf"))
        log_probs = torch.log_softmax(logits, dim=-1)
        value = self.value_head(enhanced).squeeze()
        return log_probs, value

    def forward(self, features: torch.Tensor, edges: torch.Tensor, current: int,
                cand_rows: torch.Tensor, mask: torch.Tensor
                ) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.encode(features, edges)
        return self.decode(h, current, cand_rows, mask)

    def evaluate(self, obs) -> PolicyOutput:
        """Non-differentiable evaluation of an env Observation."""
        dtype = next(self.parameters()).dtype
        with torch.no_grad():
            log_probs, value = self.forward(
                torch.as_tensor(obs.features, dtype=dtype),
                torch.as_tensor(obs.edges, dtype=torch.long),
                obs.current_row,
                torch.as_tensor(obs.candidate_rows, dtype=torch.long),
                torch.as_tensor(obs.candidate_mask, dtype=torch.bool))
        probs = torch.exp(log_probs).to(torch.float64).numpy()
        probs[~obs.candidate_mask] = 0.0
        total = probs.sum()
        if total > 0:
            probs = probs / total
        return PolicyOutput(probs=probs, value=float(value))

    # -- persistence -----------------------------------------------------------

    def parameter_order(self) -> list[tuple[str, torch.Tensor]]:
        """The documented serialization order of all parameters."""
        out = [("input_proj.weight", self.input_proj.weight),
               ("input_proj.bias", self.input_proj.bias)]
        for i, layer in enumerate(self.encoder):
            for name in ("wq", "wk", "wv"):
                out.append((f"enc{i}.{name}.weight", getattr(layer, name).weight))
            for name in ("ff1", "ff2", "ln1", "ln2"):
                mod = getattr(layer, name)
                out.append((f"enc{i}.{name}.weight", mod.weight))
                out.append((f"enc{i}.{name}.bias", mod.bias))
        for name in ("dec_wq", "dec_wk", "dec_wv"):
            out.append((f"{name}.weight", getattr(self, name).weight))
        out.append(("combine.weight", self.combine.weight))
        out.append(("combine.bias", self.combine.bias))
        out.append(("ptr_q.weight", self.ptr_q.weight))
        out.append(("ptr_k.weight", self.ptr_k.weight))
        out.append(("value_head.weight", self.value_head.weight))
        out.append(("value_head.bias", self.value_head.bias))
        return out


def save_weights(net: PolicyNet, path: str) -> None:
    """Write header + float32 little-endian arrays in documented order."""
    with open(path, "wb") as fh:
        header = f"{_MAGIC} {_FORMAT_VERSION} {net.d} {net.layers} {net.k}\n"
        fh.write(header.encode("ascii"))
        for _, p in net.parameter_order():
            arr = p.detach().to(torch.float32).numpy()
            fh.write(arr.astype("<f4").tobytes())


def load_weights(path: str) -> PolicyNet:
    """Rebuild a PolicyNet from :func:`save_weights` output (bit-exact)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        parts = header.split()
        if len(parts) != 5 or parts[0] != _MAGIC:
            raise WeightsFormatError(f"bad weights header: {header!r}")
        try:
            version, d, layers, k = (int(x) for x in parts[1:])
        except ValueError as exc:
            raise WeightsFormatError(f"bad weights header: {header!r}") from exc
        if version != _FORMAT_VERSION:
            raise WeightsFormatError(
                f"unsupported weights format version {version}")
        net = PolicyNet(d=d, layers=layers, k=k)
        with torch.no_grad():
            for name, p in net.parameter_order():
                nbytes = p.numel() * 4
                blob = fh.read(nbytes)
                if len(blob) != nbytes:
                    raise WeightsFormatError(
                        f"weights file truncated at {name}: wanted {nbytes} "
                        f"bytes, got {len(blob)}")
                arr = np.frombuffer(blob, dtype="<f4").reshape(tuple(p.shape))
                p.copy_(torch.from_numpy(arr.copy()))
        trailing = fh.read(1)
        if trailing:
            raise WeightsFormatError("trailing bytes after declared arrays")
    return net


def select_action(output: PolicyOutput, mode: str,
                  rng: np.random.Generator | None = None) -> int:
    """Pick a candidate index: ``sample`` draws from the distribution via the
    provided rng (inverse CDF), ``greedy`` takes the argmax (first index wins
    ties)."""
    if mode == "greedy":
        return int(np.argmax(output.probs))
    if mode == "sample":
        if rng is None:
            raise ContractViolationError("sample mode needs an rng")
        cdf = np.cumsum(output.probs)
        cdf[-1] = max(cdf[-1], 1.0)
        return int(np.searchsorted(cdf, rng.random(), side="right"))
    raise ContractViolationError(f"unknown selection mode {mode!r}")
