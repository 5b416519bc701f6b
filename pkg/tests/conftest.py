import sys

import numpy as np
import pytest

from rawtfnet.tensor import finite_difference_gradient, relative_error

GRAD_SEEDS = (0, 1, 2, 3, 4)


def layer_gradient_errors(layer, x, rng, train=True, floor=1e-4, input_grad=True):
    """Relative error between backward() and central differences of sum(r * y).

    Returns a dict keyed by parameter name (plus "input"). Norms are floored
    at ``floor`` so that structurally zero gradients (a bias feeding a
    train-mode batch norm) compare finite-difference noise against a sane
    scale instead of against zero.
    """
    y = layer.forward(x, train)
    r = rng.standard_normal(y.shape)
    gx = layer.backward(r)
    analytic = {name: lyr.grads[key].copy() for name, lyr, key in layer.named_parameters()}

    def objective():
        return float(np.sum(r * layer.forward(x_cur[0], train)))

    x_cur = [x]
    errors = {}
    if input_grad and gx is not None:
        def f_x(v):
            x_cur[0] = v
            return objective()

        errors["input"] = relative_error(gx, finite_difference_gradient(f_x, x), floor)
        x_cur[0] = x
    for name, lyr, key in layer.named_parameters():
        p = lyr.params[key]
        orig = p.copy()

        def f_p(v, p=p):
            p[...] = v
            return objective()

        num = finite_difference_gradient(f_p, orig)
        p[...] = orig
        errors[name] = relative_error(analytic[name], num, floor)
    return errors


def assert_gradients(layer, x, rng, tol=1e-5, **kw):
    errors = layer_gradient_errors(layer, x, rng, **kw)
    worst = max(errors, key=errors.get)
    assert errors[worst] < tol, f"{worst}: relative error {errors[worst]:.3e}"
    return errors


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    """The bundled synthetic corpus at acceptance scale, generated once per session."""
    from rawtfnet import synthetic

    out = tmp_path_factory.mktemp("synthetic")
    protocols = synthetic.generate(out, seed=0)
    return out, protocols


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance criterion lines at the end of the run."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
