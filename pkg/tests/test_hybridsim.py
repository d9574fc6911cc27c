import math
import warnings

import numpy as np
import pytest

from se3sync import hybridsim as hs
from se3sync import potential as pt
from se3sync.config import fig2_config
from se3sync.errors import CertificateViolation, NotInJumpSet, NumericalDivergence, SynergyWarning
from se3sync.state import SwarmState

from test_controller import make_system, random_state


@pytest.fixture(scope="module")
def fig2():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SynergyWarning)
        return fig2_config().build()


def test_sets_overlap_on_boundary(fig2_w, synth_p):
    X = pt.enumerate_critical(fig2_w).poses[1]
    assert hs.in_jump_set(X, 0.0, fig2_w, synth_p)
    assert not hs.in_flow_set(X, 0.0, fig2_w, synth_p)
    assert hs.in_flow_set(np.eye(4), 0.0, fig2_w, synth_p)
    mu = pt.mu_U(X, 0.0, fig2_w, synth_p)
    p = pt.SynergyParams(
        synth_p.theta_set, synth_p.u_c1, synth_p.u_c2, synth_p.gamma, mu, synth_p.delta_star
    )
    assert hs.in_jump_set(X, 0.0, fig2_w, p) and hs.in_flow_set(X, 0.0, fig2_w, p)


def test_initial_jump_of_fig2(fig2):
    sys_, st = fig2
    new, ev = hs.do_jumps(st, sys_)
    assert new.j == 1 and ev.edges == (0, 1, 2, 3, 4)
    np.testing.assert_array_equal(new.thetas, 0.3 * np.pi)
    np.testing.assert_array_equal(new.poses, st.poses)
    np.testing.assert_array_equal(new.twists, st.twists)
    assert ev.decrease >= sys_.gains.k_X * sys_.params.delta


def test_no_jump_when_synchronized(fig2):
    sys_, _ = fig2
    st = SwarmState.from_agents(sys_.topo, [np.eye(4)] * 6)
    with pytest.raises(NotInJumpSet, match=r"t=0"):
        hs.do_jumps(st, sys_)


def test_certificate_check_reports_hybrid_time(fig2):
    sys_, _ = fig2
    ev = hs.HybridEvent(1.5, 3, (0,), (0.0,), (0.9,), 10.0, 9.99)
    with pytest.raises(CertificateViolation, match=r"t=1\.5.*j=3"):
        hs._check_jump_certificate(ev, sys_)


def test_step_flow_is_fourth_order(rng, fig2_w, synth_p):
    sys_ = make_system(fig2_w, synth_p)
    st = random_state(rng, sys_, box=0.5, twist=0.3)

    def go(h, T=0.02):
        s = st
        for _ in range(int(round(T / h))):
            s = hs.step_flow(s, sys_, h)
        return np.concatenate([s.poses.ravel(), s.twists.ravel()])

    ref = go(1.25e-5)
    e1, e2 = np.linalg.norm(go(1e-3) - ref), np.linalg.norm(go(5e-4) - ref)
    assert math.log2(e1 / e2) > 3.5


def test_simulate_from_synchronized_state(fig2):
    sys_, _ = fig2
    st = SwarmState.from_agents(sys_.topo, [np.eye(4)] * 6)
    tr = hs.simulate(sys_, st, t_end=1.0)
    assert tr.converged and tr.jumps == 0 and tr.status == "converged"
    assert tr.rows.shape == (1, len(tr.columns))
    assert math.isnan(tr.jump_slack)


def test_trace_layout(fig2):
    sys_, st = fig2
    tr = hs.simulate(sys_, st, t_end=0.05)
    assert tr.columns[:3] == ["t", "j", "theta_1"]
    assert tr.columns[-3:] == ["Vbar", "Ubar", "kinetic"]
    assert len(tr.columns) == 2 + 6 * 5 + 12 * 6 + 3
    assert tr.block("theta").shape[1] == 5
    assert tr.block("omega").shape[1] == 18
    t = tr.column("t")
    assert np.all(np.diff(t) >= 0) and t[-1] == pytest.approx(0.05)
    # rows before and after the initial jump share t = 0
    assert tr.column("j")[0] == 0 and tr.column("j")[1] == 1 and t[1] == 0
    assert tr.budget == math.ceil(tr.Vbar0 / (sys_.gains.k_X * sys_.params.delta))
    np.testing.assert_allclose(tr.column("Vbar"), 100 * tr.column("Ubar") + tr.column("kinetic"))


def test_flow_certificate_strict_and_record(fig2, monkeypatch):
    sys_, st = fig2
    monkeypatch.setattr(hs, "FLOW_SLACK", -1.0)  # every step now "increases"
    with pytest.raises(CertificateViolation, match="during flow"):
        hs.simulate(sys_, st, t_end=0.01)
    tr = hs.simulate(sys_, st, t_end=0.01, strict=False)
    assert len(tr.violations) == 10 and not tr.certificates_ok


def test_nonfinite_state_raises(fig2):
    sys_, st = fig2
    bad = st.copy()
    bad.twists[0, 0] = np.nan
    with pytest.raises(NumericalDivergence):
        hs.simulate(sys_, bad, t_end=0.01)


def test_stalled_property():
    rows = np.zeros((11, 4))
    rows[:, 0] = np.linspace(0, 10, 11)
    rows[:, 2] = 1e-12
    tr = hs.Trace(["t", "j", "grad_1", "Vbar"], rows, [], None, False, 1.0, 1, 0.0, 0.0)
    assert tr.stalled and tr.status == "stalled"
    rows[-1, 2] = 1e-3
    assert not tr.stalled and tr.status == "not converged"
