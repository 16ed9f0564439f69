import pytest

from gradients import (
    kl_gradient_error,
    layer_gradient_error,
    lstm_gradient_error,
    mse_gradient_error,
    nll_gradient_error,
)

TOL = 1e-4


@pytest.mark.parametrize("kind", ["dense", "dropout", "dropconnect", "bbb", "flipout"])
def test_layer_gradients(kind):
    assert layer_gradient_error(kind, points=10, seed=3) < TOL


@pytest.mark.parametrize("return_sequences", [False, True])
def test_lstm_gradients(return_sequences):
    assert lstm_gradient_error(points=5, seed=3, return_sequences=return_sequences) < TOL


def test_loss_gradients():
    assert mse_gradient_error(10, seed=3) < 1e-6
    assert nll_gradient_error(10, seed=3) < TOL
    assert kl_gradient_error(10, seed=3) < TOL
