import pytest

from mutsel import Interval, ModelParams, MutationKernel

# criterion id -> (passed, detail); filled by the acceptance tests
CRITERIA = {}


def record(cid, passed, detail):
    CRITERIA[cid] = (bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA, key=lambda c: (int(c.rstrip("abcdefgh")), c)):
        passed, detail = CRITERIA[cid]
        terminalreporter.write_line(f"criterion {cid:>3}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def reference_interval():
    return Interval(-1.5, 1.5)


@pytest.fixture(scope="session")
def reference_kernel():
    return MutationKernel("gaussian", sigma2=10.0, normalize=True)


@pytest.fixture(scope="session")
def unit_interval():
    return Interval(-1.0, 1.0)


@pytest.fixture(scope="session")
def reference_params(reference_interval, reference_kernel):
    return ModelParams(0.01, reference_interval, reference_kernel)


@pytest.fixture(scope="session")
def reference_run(reference_params):
    """The reference eps = 0.01 run on [-1.5, 1.5] from Gamma_2(eps, x - 1) up to t = 175 000.

    RK4 with dt = 0.05 up to t = 1000, exponential Euler with dt = 0.5 after.
    Shared by the figure reproduction, Duhamel and regime-map checks.
    """
    import time

    from mutsel import StepperConfig, make_model, run, solve_lambda
    from mutsel.profiles import cauchy_profile
    from mutsel.simulator import default_snapshot_times

    model = make_model(reference_params, 1501)
    f0 = model.state(0.0, cauchy_profile(0.01, model.gamma0, model.grid.nodes - 1.0))
    extra = [10.0, 1e2, 1e3, 1e4, 1e5, 1.5e5]
    times = tuple(sorted(set(default_snapshot_times(1.75e5).tolist()) | set(extra)))
    start = time.perf_counter()
    traj = run(model, f0, StepperConfig(dt=0.05, t_end=1.75e5, snapshot_times=times))
    wall = time.perf_counter() - start
    spec = solve_lambda(reference_params, model.grid)
    return {"model": model, "f0": f0, "traj": traj, "spec": spec, "wall": wall}
