import numpy as np
from qiskit import QuantumCircuit


def zz_feature_map(x: np.ndarray, reps: int = 2, alpha: float = 2.0) -> QuantumCircuit:
    n = len(x)
    qc = QuantumCircuit(n)
    qc.h(range(n))
    for _ in range(reps):
        for q in range(n):
            qc.p(2 * alpha * x[q], q)
        for i in range(n):
            for j in range(i + 1, n):
                phase = 2 * alpha * (np.pi - x[i]) * (np.pi - x[j])
                qc.cx(i, j)
                qc.p(phase, j)
                qc.cx(i, j)
    return qc
