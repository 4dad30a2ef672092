import numpy as np
from qiskit import QuantumCircuit
from qiskit.circuit import ParameterVector
from qiskit.quantum_info import SparsePauliOp, Statevector


class Regressor:
    """Angle-encoded variational regressor read out on Z of qubit 0."""

    def __init__(self, n_features: int, reps: int = 2) -> None:
        self.n = n_features
        self.x = ParameterVector("x", n_features)
        self.theta = ParameterVector("theta", n_features * reps)
        qc = QuantumCircuit(n_features)
        for q in range(n_features):
            qc.ry(self.x[q], q)
        for r in range(reps):
            for q in range(n_features):
                qc.ry(self.theta[r * n_features + q], q)
            for q in range(n_features - 1):
                qc.cx(q, q + 1)
        self.circuit = qc
        self.observable = SparsePauliOp("I" * (n_features - 1) + "Z")

    def predict(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        out = []
        for row in x:
            bound = self.circuit.assign_parameters(list(row) + list(theta))
            out.append(Statevector(bound).expectation_value(self.observable).real)
        return np.array(out)
