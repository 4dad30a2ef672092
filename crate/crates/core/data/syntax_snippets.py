import numpy as np


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


print("ready")
#%%
import torch
from torch import nn


class QCNNModel(nn.Module):
    """Stack of fully connected layers emulating quantum convolution steps."""

    def __init__(self) -> None:
        super().__init__()
        self.feature_map = nn.Sequential(nn.Linear(8, 16), nn.Tanh())
        self.head = nn.Linear(16, 1)

    def forward(self, inputs: torch.Tensor) -> torch.Tensor:
        x = self.feature_map(inputs)
        return torch.sigmoid(self.head(x))


__all__ = ["QCNNModel"]
#%%
from qiskit import QuantumCircuit
from qiskit.circuit import ParameterVector


def real_amplitudes(num_qubits, reps=1):
    theta = ParameterVector("theta", num_qubits * (reps + 1))
    qc = QuantumCircuit(num_qubits)
    k = 0
    for _ in range(reps):
        for q in range(num_qubits):
            qc.ry(theta[k], q)
            k += 1
        for q in range(num_qubits - 1):
            qc.cx(q, q + 1)
    for q in range(num_qubits):
        qc.ry(theta[k], q)
        k += 1
    return qc
#%%
import pennylane as qml

dev = qml.device("default.qubit", wires=2)


@qml.qnode(dev)
def circuit(weights, x):
    qml.AngleEmbedding(x, wires=[0, 1])
    qml.StronglyEntanglingLayers(weights, wires=[0, 1])
    return qml.expval(qml.PauliZ(0))
#%%
def zz_angles(x, alpha=2.0):
    """Return single and pairwise phase angles."""
    singles = [alpha * xi for xi in x]
    pairs = {}
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            pairs[(i, j)] = alpha * (3.14159 - x[i]) * (3.14159 - x[j])
    return singles, pairs
#%%
class Config:
    lr: float = 1e-3
    epochs: int = 200
    hidden = (64, 32)

    def as_dict(self):
        return {
            "lr": self.lr,
            "epochs": self.epochs,
            "hidden": list(self.hidden),
        }
#%%
try:
    import qutip as qt
except ImportError:
    qt = None


def bell_state():
    if qt is None:
        raise RuntimeError('qutip is not installed')
    return (qt.tensor(qt.basis(2, 0), qt.basis(2, 0)) + qt.tensor(qt.basis(2, 1), qt.basis(2, 1))).unit()
#%%
import math


def rx(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return [[c, -1j * s], [-1j * s, c]]


def ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return [[c, -s], [s, c]]
#%%
def train(model, loader, optimizer, loss_fn, epochs=10):
    history = []
    for epoch in range(epochs):
        total = 0.0
        for xb, yb in loader:
            optimizer.zero_grad()
            loss = loss_fn(model(xb), yb)
            loss.backward()
            optimizer.step()
            total += loss.item()
        history.append(total / max(len(loader), 1))
    return history
#%%
with open("weights.txt", "w") as fh:
    for w in [0.1, 0.2, 0.3]:
        fh.write(f"{w:.3f}\n")
print('done')
#%%
def parse_line(line):
    key, _, value = line.partition("=")
    key = key.strip()
    if not key:
        return None
    elif value.startswith('"') and value.endswith('"'):
        return key, value[1:-1]
    else:
        return key, value.strip()
#%%
from dataclasses import dataclass, field


@dataclass
class Sample:
    features: list = field(default_factory=list)
    label: int = 0

    def dim(self):
        return len(self.features)
#%%
import numpy as np


def kernel_matrix(xs, gamma=0.5):
    n = len(xs)
    k = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            d = xs[i] - xs[j]
            k[i, j] = np.exp(-gamma * np.dot(d, d))
    return k
#%%
def fidelity(psi, phi):
    overlap = sum(a.conjugate() * b for a, b in zip(psi, phi))
    return abs(overlap) ** 2


if __name__ == "__main__":
    print(fidelity([1, 0], [0.6, 0.8]))
#%%
import torch.nn.functional as F
from torch import nn


class HybridHead(nn.Module):
    def __init__(self, n_in, n_classes):
        super().__init__()
        self.fc = nn.Linear(n_in, n_classes)

    def forward(self, x):
        logits = self.fc(x)
        return F.log_softmax(logits, dim=-1)
#%%
def batched(items, size):
    batch = []
    for item in items:
        batch.append(item)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch
#%%
from qiskit import QuantumCircuit

qc = QuantumCircuit(3, 3)
qc.h(0)
qc.cx(0, 1)
qc.cx(1, 2)
qc.measure([0, 1, 2], [0, 1, 2])


def depth():
    return qc.depth()
#%%
import itertools


def pauli_strings(n):
    letters = "IXYZ"
    return ["".join(p) for p in itertools.product(letters, repeat=n)]


def weight(s):
    return sum(1 for c in s if c != "I")
#%%
class Registry(dict):
    def register(self, name):
        def decorator(fn):
            self[name] = fn
            return fn

        return decorator


models = Registry()


@models.register("linear")
def linear(x, w=1.0, b=0.0):
    return w * x + b
#%%
def expectation_z(probs):
    """<Z> on qubit 0 from basis probabilities."""
    total = 0.0
    for index, p in enumerate(probs):
        sign = -1.0 if index & 1 else 1.0
        total += sign * p
    return total
#%%
import json

CONFIG = '''
{"layers": [4, 8, 4], "activation": "relu"}
'''


def load():
    cfg = json.loads(CONFIG)
    return cfg["layers"]
#%%
async def fetch_all(client, urls):
    results = []
    for url in urls:
        async with client.get(url) as resp:
            results.append(await resp.text())
    return results
#%%
def classify(score, threshold=0.5):
    label = "positive" if score >= threshold else "negative"
    while score > 1.0:
        score /= 10.0
    return {"label": label, "score": round(score, 4)}
#%%
import numpy as np
from sklearn.model_selection import KFold


def cv_mse(model, x, y, k=5):
    errors = []
    for train_idx, test_idx in KFold(n_splits=k, shuffle=True, random_state=0).split(x):
        model.fit(x[train_idx], y[train_idx])
        pred = model.predict(x[test_idx])
        errors.append(np.mean((pred - y[test_idx]) ** 2))
    return float(np.mean(errors))
#%%
class QuantumLayer:
    n_qubits = 4

    def __init__(self, shots=1024):
        self.shots = shots
        self.params = [0.0] * (2 * self.n_qubits)

    def __repr__(self):
        return f"QuantumLayer(n_qubits={self.n_qubits}, shots={self.shots})"
#%%
def safe_div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        return float("inf")
    finally:
        pass
#%%
import torchquantum as tq


class QLayer(tq.QuantumModule):
    def __init__(self):
        super().__init__()
        self.rx0 = tq.RX(has_params=True, trainable=True)
        self.ry0 = tq.RY(has_params=True, trainable=True)

    def forward(self, qdev):
        self.rx0(qdev, wires=0)
        self.ry0(qdev, wires=1)
#%%
matrix = [
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
]


def is_permutation(m):
    return all(sorted(row) == [0, 0, 0, 1] for row in m)
#%%
def normalize(vec):
    norm = sum(abs(v) ** 2 for v in vec) ** 0.5
    if norm == 0:
        raise ValueError("zero vector")
    return [v / norm for v in vec]


state = normalize([1, 1j, 0, 0])
#%%
import numpy as np

rng = np.random.default_rng(0)
x = rng.normal(size=(100, 4))
y = (x[:, 0] + x[:, 1] > 0).astype(int)


def accuracy(pred, truth):
    return float(np.mean(pred == truth))
#%%
def lr_schedule(step, base=1e-3, warmup=100):
    if step < warmup:
        return base * (step + 1) / warmup
    decay = 0.5 ** (step // 1000)
    return base * decay
#%%
class Optimizer:
    def __init__(self, params, lr=0.01):
        self.params = list(params)
        self.lr = lr

    def step(self, grads):
        for i, g in enumerate(grads):
            self.params[i] -= self.lr * g
        return self.params
#%%
import re

PATTERN = re.compile(r"theta_(\d+)_(\d+)")


def layer_of(name):
    m = PATTERN.match(name)
    if m is None:
        return -1
    return int(m.group(1))
#%%
def encode_angles(x, scale=3.141592653589793):
    lo, hi = min(x), max(x)
    span = hi - lo or 1.0
    return [scale * (v - lo) / span for v in x]


angles = encode_angles([0.2, 0.5, 0.9])
#%%
from qiskit.circuit.library import ZZFeatureMap, RealAmplitudes

feature_map = ZZFeatureMap(feature_dimension=3, reps=2, entanglement="full")
ansatz = RealAmplitudes(num_qubits=3, reps=3)


def build():
    circuit = feature_map.compose(ansatz)
    return circuit
#%%
def flatten(nested):
    out = []
    for item in nested:
        if isinstance(item, (list, tuple)):
            out.extend(flatten(item))
        else:
            out.append(item)
    return out
#%%
import pennylane as qml
from pennylane import numpy as pnp


def cost(params, circuit, target):
    pred = circuit(params)
    return (pred - target) ** 2


params = pnp.array([0.1, 0.2], requires_grad=True)
#%%
class EarlyStopping:
    def __init__(self, patience=10):
        self.patience = patience
        self.best = float("inf")
        self.count = 0

    def __call__(self, loss):
        if loss < self.best:
            self.best, self.count = loss, 0
        else:
            self.count += 1
        return self.count >= self.patience
#%%
def describe(model):
    lines = [
        f"name: {model['name']}",
        f"qubits: {model.get('qubits', 0)}",
    ]
    return "\n".join(lines)
#%%
import numpy as np


def one_hot(labels, n_classes):
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)
#%%
def counts_to_probs(counts):
    shots = sum(counts.values())
    return {
        bits: c / shots
        for bits, c in sorted(counts.items())
    }
#%%
from typing import Callable, Sequence


def finite_difference(f: Callable[[Sequence[float]], float], x: list, eps: float = 1e-6) -> list:
    grad = []
    for i in range(len(x)):
        xp = list(x)
        xm = list(x)
        xp[i] += eps
        xm[i] -= eps
        grad.append((f(xp) - f(xm)) / (2 * eps))
    return grad
#%%
def parameter_shift(f, theta, i, shift=1.5707963267948966):
    plus = list(theta)
    minus = list(theta)
    plus[i] += shift
    minus[i] -= shift
    return 0.5 * (f(plus) - f(minus))
#%%
import logging

logger = logging.getLogger(__name__)


def run(steps):
    for step in range(steps):
        if step % 10 == 0:
            logger.info("step %d", step)
    return steps
#%%
SEEDS = {"ml": "ML-Github/", "qml": "QML-Github/"}


def seed_path(kind, rel):
    prefix = SEEDS[kind]
    return "seed_codebase/" + prefix + rel
#%%
class Node:
    __slots__ = ("value", "children")

    def __init__(self, value):
        self.value = value
        self.children = []

    def walk(self):
        yield self.value
        for child in self.children:
            yield from child.walk()
#%%
def brier(probs, labels):
    total = 0.0
    for p, y in zip(probs, labels):
        for k, pk in enumerate(p):
            target = 1.0 if k == y else 0.0
            total += (pk - target) ** 2
    return total / len(labels)
#%%
import torch


def mlp(sizes):
    layers = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layers += [torch.nn.Linear(a, b), torch.nn.ReLU()]
    return torch.nn.Sequential(*layers[:-1])


net = mlp([4, 64, 32, 1])
#%%
def chunk_text(text, width=72):
    words = text.split()
    line, lines = "", []
    for w in words:
        if len(line) + len(w) + 1 > width:
            lines.append(line)
            line = w
        else:
            line = (line + " " + w).strip()
    lines.append(line)
    return lines
#%%
def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(description="Toy trainer")
    parser.add_argument("--epochs", type=int, default=5)
    args = parser.parse_args(argv)
    for epoch in range(args.epochs):
        print(f"epoch {epoch}")
    return 0
