"""Nonlinear nodal analysis with damped Newton iterations.

Networks mix ohmic resistors, sinh-law memristors, square-law MOSFETs and
ideal gate-controlled switches. Fixed-voltage terminals are Dirichlet nodes;
zero-ohm resistors and closed zero-ohm switches merge their end nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .model import ModelParams, current_array, current_slope_array, device_slope
from .primitives import FetBias, MosfetParams, Polarity, SolverError, mosfet_eval

GMIN = 1e-12
LEAK = 1e-12
MAX_ITERS = 50
REL_TOL = 1e-9
POLISH_STEPS = 2


@dataclass(frozen=True)
class Resistor:
    a: str
    b: str
    R: float


@dataclass(frozen=True)
class Memristor:
    name: str
    p: str
    n: str
    params: ModelParams | None


@dataclass(frozen=True)
class Fet:
    name: str
    d: str
    g: str
    s: str
    b: str
    params: MosfetParams


@dataclass(frozen=True)
class Switch:
    """Ideal switch between ``a`` and ``b``, closed while V(gate) crosses ``v_on``.

    nMOS-like switches close for V(gate) >= v_on, pMOS-like for V(gate) <= v_on.
    The gate must be a fixed terminal.
    """

    a: str
    b: str
    gate: str
    v_on: float
    r_on: float = 0.0
    active_low: bool = False


@dataclass
class Circuit:
    resistors: list[Resistor] = field(default_factory=list)
    memristors: list[Memristor] = field(default_factory=list)
    fets: list[Fet] = field(default_factory=list)
    switches: list[Switch] = field(default_factory=list)
    terminals: dict[str, float | None] = field(default_factory=dict)
    nodes: dict[str, None] = field(default_factory=dict)

    def _touch(self, *names: str) -> None:
        for n in names:
            self.nodes.setdefault(n, None)

    def terminal(self, name: str, voltage: float | None = None) -> str:
        """Declare a driven terminal; ``None`` leaves it floating until biased."""
        self._touch(name)
        self.terminals[name] = voltage
        return name

    def resistor(self, a: str, b: str, R: float) -> None:
        if R < 0:
            raise ValueError("resistance must be >= 0")
        self._touch(a, b)
        self.resistors.append(Resistor(a, b, float(R)))

    def memristor(self, name: str, p: str, n: str, params: ModelParams | None) -> None:
        self._touch(p, n)
        self.memristors.append(Memristor(name, p, n, params))

    def fet(self, name: str, d: str, g: str, s: str, b: str, params: MosfetParams) -> None:
        self._touch(d, g, s, b)
        self.fets.append(Fet(name, d, g, s, b, params))

    def switch(self, a: str, b: str, gate: str, v_on: float, r_on: float = 0.0, active_low: bool = False) -> None:
        self._touch(a, b, gate)
        self.switches.append(Switch(a, b, gate, v_on, r_on, active_low))

    def compile(self, biases: Mapping[str, float | None] | None = None) -> "NodalSystem":
        return NodalSystem(self, biases or {})


class _UnionFind:
    def __init__(self, names):
        self.parent = {n: n for n in names}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the lexicographically smaller root for determinism
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass
class NodalSolution:
    voltages: dict[str, float]
    mem_voltages: np.ndarray
    mem_currents: np.ndarray
    terminal_currents: dict[str, float]
    fet_biases: dict[str, FetBias]
    fets: dict[str, MosfetParams]
    residual: float
    scale: float
    iterations: int

    def __getitem__(self, node: str) -> float:
        return self.voltages[node]


class NodalSystem:
    """A circuit compiled for one bias set; memristor states can be updated in place."""

    def __init__(self, circuit: Circuit, biases: Mapping[str, float | None]):
        self.circuit = circuit
        fixed = {k: v for k, v in circuit.terminals.items() if v is not None}
        for k, v in biases.items():
            if k not in circuit.nodes:
                raise KeyError(f"unknown terminal {k!r}")
            if v is None:
                fixed.pop(k, None)
            else:
                fixed[k] = float(v)
        for sw in circuit.switches:
            if sw.gate not in fixed:
                raise ValueError(f"switch gate {sw.gate!r} must be a biased terminal")

        uf = _UnionFind(circuit.nodes)
        resistors = []
        for r in circuit.resistors:
            if r.R == 0:
                uf.union(r.a, r.b)
            else:
                resistors.append(r)
        for sw in circuit.switches:
            vg = fixed[sw.gate]
            closed = vg <= sw.v_on if sw.active_low else vg >= sw.v_on
            if not closed:
                continue
            if sw.r_on == 0:
                uf.union(sw.a, sw.b)
            else:
                resistors.append(Resistor(sw.a, sw.b, sw.r_on))

        groups = sorted({uf.find(n) for n in circuit.nodes})
        gidx = {g: k for k, g in enumerate(groups)}
        self.node_group = {n: gidx[uf.find(n)] for n in circuit.nodes}
        G = len(groups)
        value = np.zeros(G)
        is_fixed = np.zeros(G, dtype=bool)
        for name, v in fixed.items():
            k = self.node_group[name]
            if is_fixed[k] and value[k] != v:
                raise ValueError(f"terminal {name!r} is shorted to a terminal at a different voltage")
            is_fixed[k] = True
            value[k] = v
        self.n_groups = G
        self.fixed_mask = is_fixed
        self.fixed_value = value
        self.fixed_terminals = fixed

        ng = self.node_group
        self.res_a = np.array([ng[r.a] for r in resistors], dtype=np.int64)
        self.res_b = np.array([ng[r.b] for r in resistors], dtype=np.int64)
        self.res_g = np.array([1.0 / r.R for r in resistors])

        mems = circuit.memristors
        self.mem_names = [m.name for m in mems]
        self.mem_p = np.array([ng[m.p] for m in mems], dtype=np.int64)
        self.mem_n = np.array([ng[m.n] for m in mems], dtype=np.int64)
        self.R = np.ones(len(mems))
        # group memristors by parameter set for vectorized evaluation
        keyed: dict[ModelParams | None, list[int]] = {}
        for k, m in enumerate(mems):
            keyed.setdefault(m.params, []).append(k)
        self._mem_groups = [(p, np.array(ix, dtype=np.int64)) for p, ix in keyed.items()]

        self.fet_list = [(f.name, ng[f.d], ng[f.g], ng[f.s], ng[f.b], f.params) for f in circuit.fets]

        self._prune_stubs()
        self._add_leaks()
        self.slave_mask = np.zeros(G, dtype=bool)
        self.slave_mask[[leaf for leaf, _ in self.stubs]] = True
        self.leak[self.slave_mask] = 0.0
        self.active = ~self.fixed_mask & ~self.slave_mask

    def set_R(self, R) -> None:
        R = np.asarray(R, dtype=float).reshape(-1)
        if R.shape != self.R.shape:
            raise ValueError(f"expected {self.R.size} states, got {R.size}")
        if np.any(R <= 0):
            raise ValueError("resistive states must be positive")
        self.R = R.copy()

    def _prune_stubs(self) -> None:
        """Drop resistors that dead-end in an otherwise unconnected node.

        Such a stub carries no current, so its far node simply follows its
        neighbour. Keeping it in the matrix pairs a large segment conductance
        with a tiny load and costs about eps * g_seg / g_load in accuracy.
        """
        G = self.n_groups
        touched = np.zeros(G, dtype=bool)
        touched[self.fixed_mask] = True
        touched[self.mem_p] = True
        touched[self.mem_n] = True
        for _, d, g, s, b, _ in self.fet_list:
            touched[[d, g, s, b]] = True
        degree = np.zeros(G, dtype=np.int64)
        np.add.at(degree, self.res_a, 1)
        np.add.at(degree, self.res_b, 1)
        keep = np.ones(self.res_g.size, dtype=bool)
        self.stubs: list[tuple[int, int]] = []
        changed = True
        while changed:
            changed = False
            for k in np.flatnonzero(keep).tolist():
                a, b = int(self.res_a[k]), int(self.res_b[k])
                for leaf, other in ((a, b), (b, a)):
                    if leaf != other and not touched[leaf] and degree[leaf] == 1:
                        keep[k] = False
                        degree[a] -= 1
                        degree[b] -= 1
                        self.stubs.append((leaf, other))
                        changed = True
                        break
        self.res_a, self.res_b, self.res_g = self.res_a[keep], self.res_b[keep], self.res_g[keep]

    def _fill_stubs(self, V: np.ndarray) -> None:
        for leaf, other in reversed(self.stubs):
            V[leaf] = V[other]

    def _add_leaks(self) -> None:
        """Tie groups with no conductive path to any fixed node to ground through LEAK."""
        G = self.n_groups
        uf = _UnionFind(range(G))
        for a, b in zip(self.res_a.tolist(), self.res_b.tolist()):
            uf.union(a, b)
        for a, b in zip(self.mem_p.tolist(), self.mem_n.tolist()):
            uf.union(a, b)
        for _, d, _, s, _, _ in self.fet_list:
            uf.union(d, s)
        anchored = {uf.find(k) for k in range(G) if self.fixed_mask[k]}
        self.leak = np.array(
            [LEAK if not self.fixed_mask[k] and uf.find(k) not in anchored else 0.0 for k in range(G)]
        )

    # -- device evaluation -------------------------------------------------

    def _mem_eval(self, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v = V[self.mem_p] - V[self.mem_n]
        i = np.empty_like(v)
        g = np.empty_like(v)
        for params, ix in self._mem_groups:
            if params is None:
                i[ix] = v[ix] / self.R[ix]
                g[ix] = 1.0 / self.R[ix]
            else:
                i[ix] = current_array(params, self.R[ix], v[ix])
                g[ix] = current_slope_array(params, self.R[ix], v[ix])
        return i, g

    def _assemble(self, V: np.ndarray, jacobian: bool = True):
        G = self.n_groups
        F = np.zeros(G)
        J = np.zeros((G, G)) if jacobian else None
        branch_max = 0.0

        ir = self.res_g * (V[self.res_a] - V[self.res_b])
        np.add.at(F, self.res_a, ir)
        np.add.at(F, self.res_b, -ir)
        if ir.size:
            branch_max = max(branch_max, float(np.max(np.abs(ir))))
        if jacobian and ir.size:
            np.add.at(J, (self.res_a, self.res_a), self.res_g)
            np.add.at(J, (self.res_b, self.res_b), self.res_g)
            np.add.at(J, (self.res_a, self.res_b), -self.res_g)
            np.add.at(J, (self.res_b, self.res_a), -self.res_g)

        if self.mem_p.size:
            im, gm = self._mem_eval(V)
            np.add.at(F, self.mem_p, im)
            np.add.at(F, self.mem_n, -im)
            branch_max = max(branch_max, float(np.max(np.abs(im))))
            if jacobian:
                np.add.at(J, (self.mem_p, self.mem_p), gm)
                np.add.at(J, (self.mem_n, self.mem_n), gm)
                np.add.at(J, (self.mem_p, self.mem_n), -gm)
                np.add.at(J, (self.mem_n, self.mem_p), -gm)

        for _, d, g, s, _, m in self.fet_list:
            i, gg, gs, gd = mosfet_eval(m, V[g], V[s], V[d])
            i += GMIN * (V[d] - V[s])
            gd += GMIN
            gs -= GMIN
            F[d] += i
            F[s] -= i
            branch_max = max(branch_max, abs(i))
            if jacobian:
                for node, sign in ((d, 1.0), (s, -1.0)):
                    J[node, g] += sign * gg
                    J[node, s] += sign * gs
                    J[node, d] += sign * gd

        F += self.leak * V
        if jacobian:
            J[np.diag_indices(G)] += self.leak
        return F, J, branch_max

    def _residual(self, F: np.ndarray) -> float:
        free = self.active
        return float(np.max(np.abs(F[free]))) if np.any(free) else 0.0

    def _initial_guess(self) -> np.ndarray:
        """Solve the network with every nonlinear branch replaced by a small-signal conductance."""
        G = self.n_groups
        J = np.zeros((G, G))

        def stamp(a, b, g):
            J[a, a] += g
            J[b, b] += g
            J[a, b] -= g
            J[b, a] -= g

        for a, b, g in zip(self.res_a.tolist(), self.res_b.tolist(), self.res_g.tolist()):
            stamp(a, b, g)
        for k, (p, n) in enumerate(zip(self.mem_p.tolist(), self.mem_n.tolist())):
            params = self.circuit.memristors[k].params
            stamp(p, n, device_slope(params, self.R[k], 0.0))
        for _, d, g, s, _, m in self.fet_list:
            # nominal on-conductance at 1 V overdrive, or GMIN when the gate is known to be off
            on = 2.0 * m.k_gain
            if self.fixed_mask[g]:
                vg = self.fixed_value[g]
                ends = [self.fixed_value[x] for x in (d, s) if self.fixed_mask[x]]
                if ends:
                    drive = max(vg - e for e in ends) if m.polarity is Polarity.NMOS else max(e - vg for e in ends)
                    if drive <= m.v_th:
                        on = 0.0
            stamp(d, s, on + GMIN)
        J[np.diag_indices(G)] += self.leak
        return self._solve_free(J, np.zeros(G), np.zeros(G), base=True)

    def _solve_free(self, J: np.ndarray, F: np.ndarray, V: np.ndarray, base: bool = False) -> np.ndarray:
        free = self.active
        out = V.copy()
        if base:
            out[self.fixed_mask] = self.fixed_value[self.fixed_mask]
            rhs = -J[np.ix_(free, self.fixed_mask)] @ self.fixed_value[self.fixed_mask]
            A = J[np.ix_(free, free)]
        else:
            rhs = -F[free]
            A = J[np.ix_(free, free)]
        if not np.any(free):
            self._fill_stubs(out)
            return out
        try:
            x = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular nodal matrix: {exc}") from None
        if base:
            out[free] = x
        else:
            out[free] = V[free] + x
        self._fill_stubs(out)
        return out

    def solve(self, v0: np.ndarray | None = None, max_iters: int = MAX_ITERS) -> NodalSolution:
        if v0 is None:
            V = self._initial_guess()
        else:
            V = np.asarray(v0, dtype=float).copy()
            V[self.fixed_mask] = self.fixed_value[self.fixed_mask]
            self._fill_stubs(V)
        F, J, scale = self._assemble(V)
        res = self._residual(F)
        for it in range(max_iters + 1):
            if res <= REL_TOL * scale or res == 0.0:
                V, res, scale = self._polish(V, F, J, res, scale)
                return self._solution(V, res, scale, it)
            if it == max_iters:
                break
            step = self._solve_free(J, F, V) - V
            if not np.all(np.isfinite(step)):
                raise SolverError("Newton step is not finite")
            lam = 1.0
            for _ in range(40):
                Vn = V + lam * step
                Fn, Jn, sn = self._assemble(Vn)
                rn = self._residual(Fn)
                if rn < res or lam < 1e-9:
                    break
                lam *= 0.5
            V, F, J, scale, res = Vn, Fn, Jn, sn, rn
        raise SolverError(
            f"Newton did not converge in {max_iters} iterations: residual {res:.3e} A "
            f"vs tolerance {REL_TOL * scale:.3e} A"
        )

    def _polish(self, V, F, J, res, scale, steps: int = POLISH_STEPS):
        """Extra Newton steps past tolerance, kept while the point stays converged.

        Branch-form residuals are exact to rounding while the assembled
        Jacobian is not, so these steps act as iterative refinement. They
        matter for floating lines: the max-norm residual there sits at a
        rounding floor of the stiff segments, yet the line's common-mode
        voltage can still be off by about 1e-9 relative.
        """
        for _ in range(steps):
            if res == 0.0:
                break
            Vn = self._solve_free(J, F, V)
            if not np.all(np.isfinite(Vn)):
                break
            Fn, Jn, sn = self._assemble(Vn)
            rn = self._residual(Fn)
            if not rn <= REL_TOL * sn:
                break
            V, F, J, res, scale = Vn, Fn, Jn, rn, sn
        return V, res, scale

    def _solution(self, V: np.ndarray, res: float, scale: float, iters: int) -> NodalSolution:
        volts = {n: float(V[k]) for n, k in self.node_group.items()}
        if self.mem_p.size:
            vm = V[self.mem_p] - V[self.mem_n]
            im, _ = self._mem_eval(V)
        else:
            vm = im = np.zeros(0)
        F, _, _ = self._assemble(V, jacobian=False)
        # current delivered by each driven terminal into the network
        term_i = {}
        for name in self.fixed_terminals:
            term_i[name] = float(F[self.node_group[name]])
        biases = {}
        fets = {}
        for name, d, g, s, b, m in self.fet_list:
            biases[name] = FetBias(float(V[g]), float(V[s]), float(V[d]), float(V[b]))
            fets[name] = m
        return NodalSolution(volts, vm, im, term_i, biases, fets, res, scale, iters)


def mem_index(system: NodalSystem) -> dict[str, int]:
    return {n: k for k, n in enumerate(system.mem_names)}

