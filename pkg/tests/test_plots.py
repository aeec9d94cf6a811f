from __future__ import annotations

import pytest

from lorentzgas.cells import tail_sweep
from lorentzgas.errors import EmptyData, UnsupportedKind
from lorentzgas.experiments import ExperimentConfig, clt_experiment, correlation_experiment
from lorentzgas.plots import emit_plot, render
from lorentzgas.rng import StreamFactory


@pytest.fixture(scope="module")
def reports():
    return {
        "clt": clt_experiment(ExperimentConfig(sigma=0.2, n=50, trials=2000)),
        "tail": tail_sweep([4, 8, 16], 0.1, 200_000, StreamFactory(0, "plot")),
        "correlation": correlation_experiment(
            ExperimentConfig(sigma=0.1, trials=50_000, H=10.0, H_hat=100.0, j_max=6)),
    }


@pytest.mark.parametrize("kind", ["clt", "tail", "correlation"])
def test_render_is_deterministic(reports, kind, tmp_path):
    a = render(reports[kind], kind)
    assert a == render(reports[kind], kind)
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    path = emit_plot(reports[kind], kind, tmp_path / f"{kind}.svg")
    assert path.read_text() == a


def test_unsupported_kind(reports, tmp_path):
    with pytest.raises(UnsupportedKind):
        emit_plot(reports["clt"], "llt", tmp_path / "x.svg")
    with pytest.raises(UnsupportedKind):
        emit_plot(reports["clt"], "tail", tmp_path / "y.svg")
    assert not list(tmp_path.iterdir())


def test_empty_data(tmp_path):
    empty_tail = {"kind": "tail", "H": [4.0], "estimate": [0.0], "sigma": 0.1, "slope": None,
                  "samples": 10}
    with pytest.raises(EmptyData):
        emit_plot(empty_tail, "tail", tmp_path / "t.svg")
    with pytest.raises(EmptyData):
        emit_plot({}, "clt", tmp_path / "c.svg")
    assert not list(tmp_path.iterdir())
