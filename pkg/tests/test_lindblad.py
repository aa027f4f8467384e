import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rabisim.lindblad as lindblad_mod
from rabisim import (
    CollapseChannel,
    DeviceParams,
    HilbertLayout,
    Operator,
    QuantumState,
    TimeDependentHamiltonian,
    TimeGrid,
    TimeSeries,
    Tolerances,
    basis_state,
    embed,
    evolve,
    expectation,
    fock_ladder,
    jaynes_cummings,
    lindblad_rhs,
    pauli_set,
    qubit_mode_layout,
    standard_channels,
)
from rabisim.lindblad import expectation_real
from conftest import random_hermitian
from oracles import propagate_expm

TWOPI = 2 * math.pi
MHZ = TWOPI * 1e6


class TestStandardChannels:
    def test_paper_rates(self):
        p = DeviceParams()  # 1/T1 = 0.2e6, 1/T2 = 2.0e6
        layout = qubit_mode_layout(2, 4)
        chans = {c.label: c for c in standard_channels(p, layout)}
        assert chans["qubit decay"].rate == pytest.approx(0.2e6)
        assert chans["mode decay"].rate == pytest.approx(3.9e6)
        # gamma_phi = 1/T2 - 1/(2 T1) = 1.9e6, channel carries gamma_phi/2
        assert chans["qubit dephasing"].rate == pytest.approx(1.9e6 / 2)

    def test_no_dephasing_at_t2_limit(self):
        p = DeviceParams(t2=10e-6, t1=5e-6)  # T2 = 2 T1
        layout = qubit_mode_layout(2, 4)
        chans = {c.label: c for c in standard_channels(p, layout)}
        assert chans["qubit dephasing"].rate == pytest.approx(0.0, abs=1e-12)

    def test_t2_bound_enforced(self):
        with pytest.raises(ValueError, match="T2"):
            DeviceParams(t2=11e-6, t1=5e-6)

    def test_three_level_lowering_weighted(self):
        p = DeviceParams(qubit_levels=3)
        layout = HilbertLayout.of(("qubit", 3), ("mode", 3))
        chans = {c.label: c for c in standard_channels(p, layout)}
        op = chans["qubit decay"].operator.matrix
        # the 1->2 element carries the g_12/g_01 ratio ~ sqrt(2)
        el01 = op[0 * 3, 1 * 3]
        el12 = op[1 * 3, 2 * 3]
        assert abs(el12 / el01) == pytest.approx(math.sqrt(2), rel=0.05)

    def test_cavity_decay_rate_convention(self):
        # <n>(t) = n0 exp(-kappa t) for a one-photon Fock state
        p = DeviceParams()
        layout = HilbertLayout.of(("qubit", 2), ("mode", 4))
        b, bdag = fock_ladder(4)
        h = Operator(layout, np.zeros((8, 8)))
        chans = [c for c in standard_channels(p, layout) if c.label == "mode decay"]
        grid = TimeGrid.to(0.4e-6, 101)
        series = evolve(
            TimeDependentHamiltonian.static_only(h),
            basis_state(layout, {"mode": 1}),
            chans,
            grid,
            {"n_mode": embed(bdag @ b, "mode", layout)},
            Tolerances(rtol=1e-10, atol=1e-12),
        )
        expected = np.exp(-p.kappa * grid.times)
        assert np.max(np.abs(series.trace("n_mode") - expected)) <= 1e-6


class TestRhs:
    def test_zero_when_commuting_and_closed(self):
        h = np.diag([1.0, 2.0]).astype(complex)
        rho = np.diag([0.3, 0.7]).astype(complex)
        out = lindblad_rhs(h, rho, [])
        assert np.max(np.abs(out)) == 0

    @given(seed=st.integers(0, 2**31), nchan=st.integers(0, 3))
    @settings(max_examples=25, deadline=None)
    def test_trace_free(self, seed, nchan):
        rng = np.random.default_rng(seed)
        d = 4
        lay = HilbertLayout.of(("s", d))
        h = random_hermitian(rng, d)
        rho = random_hermitian(rng, d)
        rho = rho @ rho.conj().T
        rho /= np.trace(rho)
        chans = [
            CollapseChannel(Operator(lay, rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))), rng.uniform(0, 2))
            for _ in range(nchan)
        ]
        out = lindblad_rhs(h, rho, chans)
        assert abs(np.trace(out)) <= 1e-12 * max(np.linalg.norm(rho), 1.0) * (1 + np.linalg.norm(h))

    def test_t1_decay_slope(self):
        lay = HilbertLayout.of(("qubit", 2))
        _, _, _, _, sm = pauli_set()
        t1 = 5e-6
        rho = np.diag([0.0, 1.0]).astype(complex)  # |e><e|
        out = lindblad_rhs(np.zeros((2, 2)), rho, [CollapseChannel(sm, 1 / t1)])
        assert out[1, 1].real == pytest.approx(-1 / t1, rel=1e-12)


class TestExpectation:
    def test_vacuum_number(self):
        b, bdag = fock_ladder(5)
        vac = basis_state(HilbertLayout.of(("mode", 5)), {})
        assert expectation(bdag @ b, vac) == 0

    def test_sign_convention(self):
        _, _, sz, _, _ = pauli_set()
        e = QuantumState.from_vector(sz.layout, [0, 1])
        assert expectation(sz, e).real == pytest.approx(1.0)

    def test_maximally_mixed(self):
        sx, _, _, _, _ = pauli_set()
        mixed = QuantumState.from_density(sx.layout, np.eye(2) / 2)
        assert abs(expectation(sx, mixed)) <= 1e-15

    def test_layout_mismatch(self):
        sx, _, _, _, _ = pauli_set()
        vac = basis_state(HilbertLayout.of(("mode", 5)), {})
        with pytest.raises(ValueError):
            expectation(sx, vac)

    def test_imaginary_residue_guard(self):
        lay = HilbertLayout.of(("q", 2))
        nonherm = Operator(lay, np.array([[0, 1], [0, 0]], dtype=complex))
        plus = QuantumState.from_vector(lay, np.array([1, 1j]) / math.sqrt(2))
        with pytest.raises(ValueError, match="residue"):
            expectation_real(nonherm, plus)


class TestEvolve:
    def test_constant_without_dynamics(self):
        lay = HilbertLayout.of(("qubit", 2))
        h = TimeDependentHamiltonian.static_only(Operator(lay, np.zeros((2, 2))))
        _, _, sz, _, _ = pauli_set()
        series = evolve(h, basis_state(lay, {"qubit": 1}), [], TimeGrid.to(1e-6, 11), {"P_e": Operator(lay, np.diag([0.0, 1.0]))})
        assert np.allclose(series.trace("P_e"), 1.0)

    def test_vacuum_rabi_analytic(self):
        layout = qubit_mode_layout(2, 6)
        g = 4.3 * MHZ
        h = jaynes_cummings(0.0, 0.0, g, layout)  # rotating frame at resonance
        grid = TimeGrid.to(0.25e-6, 501)
        proj = np.zeros((2, 2), dtype=complex)
        proj[1, 1] = 1
        pe_op = embed(Operator(pauli_set()[0].layout, proj), "qubit", layout)
        series = evolve(
            TimeDependentHamiltonian.static_only(h),
            basis_state(layout, {"qubit": 1}),
            [],
            grid,
            {"P_e": pe_op},
            Tolerances(rtol=1e-10, atol=1e-12),
        )
        analytic = np.cos(g * grid.times) ** 2
        assert np.max(np.abs(series.trace("P_e") - analytic)) <= 1e-7
        # full swap at t = pi / (2 g) ~ 58.1 ns
        t_swap = math.pi / (2 * g)
        assert t_swap == pytest.approx(58.1e-9, rel=1e-3)

    def test_integrator_convergence(self):
        # the 1/(40 f_max) step ceiling already pins the default-tolerance
        # error near roundoff; tolerance control binds below rtol ~ 1e-10,
        # where each tightening by 10x must cut the error by the expected
        # factor against the analytic reference
        layout = qubit_mode_layout(2, 6)
        g = 4.3 * MHZ
        h = TimeDependentHamiltonian.static_only(jaynes_cummings(0.0, 0.0, g, layout))
        grid = TimeGrid.to(1.0e-6, 201)
        proj = np.zeros((2, 2), dtype=complex)
        proj[1, 1] = 1
        pe_op = embed(Operator(pauli_set()[0].layout, proj), "qubit", layout)
        analytic = np.cos(g * grid.times) ** 2
        errs = []
        for rtol in (1e-11, 1e-12, 1e-13):
            s = evolve(h, basis_state(layout, {"qubit": 1}), [], grid, {"P_e": pe_op}, Tolerances(rtol=rtol, atol=1e-14))
            errs.append(np.max(np.abs(s.trace("P_e") - analytic)))
        assert errs[0] / errs[1] >= 3.0
        assert errs[1] / errs[2] >= 3.0
        default = evolve(h, basis_state(layout, {"qubit": 1}), [], grid, {"P_e": pe_op})
        assert np.max(np.abs(default.trace("P_e") - analytic)) <= 1e-6

    def test_driven_qubit_rabi_frequency(self):
        lay = HilbertLayout.of(("qubit", 2))
        sx, _, _, _, _ = pauli_set()
        eta1 = 50 * MHZ
        h = TimeDependentHamiltonian.static_only(Operator(lay, (eta1 / 2) * sx.matrix))
        grid = TimeGrid.to(0.2e-6, 801)
        series = evolve(h, basis_state(lay, {"qubit": 1}), [], grid, {"P_e": Operator(lay, np.diag([0.0, 1.0]))})
        from rabisim.signal_tools import extract_rabi_frequency

        w, unc = extract_rabi_frequency(series.times, series.trace("P_e"))
        assert w == pytest.approx(eta1, abs=2 * unc)

    def test_exponential_qubit_decay(self):
        lay = HilbertLayout.of(("qubit", 2))
        _, _, _, _, sm = pauli_set()
        t1 = 5e-6
        h = TimeDependentHamiltonian.static_only(Operator(lay, np.zeros((2, 2))))
        grid = TimeGrid.to(2e-6, 101)
        series = evolve(
            h,
            basis_state(lay, {"qubit": 1}),
            [CollapseChannel(sm, 1 / t1)],
            grid,
            {"P_e": Operator(lay, np.diag([0.0, 1.0]))},
        )
        assert np.max(np.abs(series.trace("P_e") - np.exp(-grid.times / t1))) <= 1e-7

    def test_unitary_limit_purity_and_energy(self):
        layout = qubit_mode_layout(2, 8)
        g = 5 * MHZ
        h = jaynes_cummings(0.0, 0.0, g, layout)
        psi0 = basis_state(layout, {"qubit": 1})
        rho0 = QuantumState.from_density(layout, psi0.density())  # force density path
        grid = TimeGrid.to(0.3e-6, 61)
        series = evolve(
            TimeDependentHamiltonian.static_only(h),
            rho0,
            [],
            grid,
            {"P_e": embed(Operator(pauli_set()[0].layout, np.diag([0.0, 1.0]).astype(complex)), "qubit", layout)},
            Tolerances(rtol=1e-9, atol=1e-11),
        )
        assert series.metadata["trace_drift"] <= 1e-8
        assert series.metadata["hermiticity_drift"] <= 1e-8
        # purity/energy via a re-run capturing the final state is overkill;
        # H expectation conservation follows from the recorded drift plus the
        # analytic case above, checked here through energy as an observable
        h_op = Operator(layout, h.matrix)
        series_e = evolve(
            TimeDependentHamiltonian.static_only(h), rho0, [], grid, {"energy": h_op},
            Tolerances(rtol=1e-9, atol=1e-11),
        )
        e = series_e.trace("energy")
        scale = max(abs(e[0]), g)
        assert np.max(np.abs(e - e[0])) <= 1e-8 * scale

    def test_liouvillian_oracle_agreement(self, rng):
        d = 6
        lay = HilbertLayout.of(("s", d))
        h = random_hermitian(rng, d) * 1e7
        l = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rate = 3e5
        psi = rng.normal(size=d) + 1j * rng.normal(size=d)
        psi /= np.linalg.norm(psi)
        rho0 = np.outer(psi, psi.conj())
        obs_mat = random_hermitian(rng, d)
        grid = TimeGrid.to(1e-6, 21)
        series = evolve(
            TimeDependentHamiltonian.static_only(Operator(lay, h)),
            QuantumState.from_density(lay, rho0),
            [CollapseChannel(Operator(lay, l), rate)],
            grid,
            {"obs": Operator(lay, obs_mat)},
            Tolerances(rtol=1e-10, atol=1e-13),
        )
        oracle_states = propagate_expm(h, rho0, grid.times, [(rate, l)])
        expected = np.array([float(np.real(np.trace(obs_mat @ rho))) for rho in oracle_states])
        assert np.max(np.abs(series.trace("obs") - expected)) <= 1e-7

    def test_step_ceiling_recorded(self):
        lay = HilbertLayout.of(("qubit", 2))
        sx, _, _, _, _ = pauli_set()
        h = TimeDependentHamiltonian(
            static=Operator(lay, np.zeros((2, 2))),
            terms=((sx, lambda t: math.cos(TWOPI * 1e8 * t)),),
            carrier_frequencies=(1e8,),
        )
        series = evolve(h, basis_state(lay, {"qubit": 0}), [], TimeGrid.to(1e-7, 11), {})
        assert series.metadata["max_step"] <= 1 / (40 * 1e8)

    def test_drift_limit_enforced(self, monkeypatch):
        monkeypatch.setattr(lindblad_mod, "DRIFT_LIMIT", -1.0)
        lay = HilbertLayout.of(("qubit", 2))
        _, _, _, _, sm = pauli_set()
        h = TimeDependentHamiltonian.static_only(Operator(lay, np.zeros((2, 2))))
        with pytest.raises(lindblad_mod.IntegrationError, match="drift"):
            evolve(h, basis_state(lay, {"qubit": 1}), [CollapseChannel(sm, 1e5)], TimeGrid.to(1e-7, 5), {})

    def test_positivity_recorded(self):
        p = DeviceParams()
        layout = qubit_mode_layout(2, 8)
        h = jaynes_cummings(0.0, 0.0, p.g, layout)
        series = evolve(
            TimeDependentHamiltonian.static_only(h),
            basis_state(layout, {"qubit": 1}),
            standard_channels(p, layout),
            TimeGrid.to(0.3e-6, 61),
            {},
        )
        assert series.metadata["min_eigenvalue"] >= -1e-6


class TestContainers:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0.5, 10)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 1.0, 1)

    def test_population_bounds(self):
        with pytest.raises(ValueError, match="population"):
            TimeSeries(times=np.arange(3.0), traces={"P_e": np.array([0.0, 0.5, 1.5])})

    def test_occupation_bounds(self):
        with pytest.raises(ValueError, match="negative"):
            TimeSeries(times=np.arange(3.0), traces={"n_mode": np.array([0.0, -0.5, 1.0])})

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            TimeSeries(times=np.arange(3.0), traces={"x": np.zeros(4)})

    def test_channel_rate_validation(self):
        sx, _, _, _, _ = pauli_set()
        with pytest.raises(ValueError):
            CollapseChannel(sx, -1.0)
