import pytest

from spatialrank.config import THREADS_ENV, load_plan, plan_from_dict, resolve_workers
from spatialrank.errors import ConfigError

DOC = {
    "master_seed": 9,
    "replications": 30,
    "grid": [
        {"scenarios": ["I", "III"], "sizes": [[20, 100], [20, 30, 200]],
         "shifts": [None, {"sparsity": 0.5, "eta": 0.5}], "tests": ["SR"]},
        {"scenarios": ["VI"], "sizes": [[10, 12]], "sample2": {"order": 3}, "replications": 5, "tag": "ma",
         "shifts": [{"sparsity": 0.95, "eta": 0.1, "normalization": "raw"}], "tests": ["SR", "TR"]},
    ],
}


def test_grid_expands_to_cells():
    plan = plan_from_dict(DOC)
    assert len(plan.cells) == 2 * 2 * 2 + 1
    assert plan.master_seed == 9
    c = plan.cells[2]
    assert (c.label, c.n1, c.n2, c.p, c.replications) == ("I", 20, 30, 200, 30)
    last = plan.cells[-1]
    assert last.replications == 5 and last.tests == ("SR", "TR") and last.sample2.order == 3
    assert last.label == "VI/ma"


def test_overrides():
    plan = plan_from_dict(DOC, reps_override=3, seed_override=1, workers_override="2")
    assert {c.replications for c in plan.cells} == {3}
    assert plan.master_seed == 1 and plan.workers == 2


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d["grid"][0]["sizes"].__setitem__(1, [20, "x"]), "grid[0].sizes[1][1]"),
    (lambda d: d["grid"][1].__setitem__("shifts", [{"sparsity": 0.5}]), "grid[1].shifts[0].eta"),
    (lambda d: d["grid"][0].__setitem__("tests", ["CQ"]), "grid[0].tests[0]"),
    (lambda d: d.__setitem__("alpha", 2), "alpha"),
    (lambda d: d.__setitem__("colour", 1), "<root>.colour"),
    (lambda d: d["grid"][0].__setitem__("scenarios", ["X"]), "grid[0].scenarios[0]"),
    (lambda d: d.pop("grid"), "grid"),
])
def test_schema_errors_name_the_field(mutate, path):
    import copy
    doc = copy.deepcopy(DOC)
    mutate(doc)
    with pytest.raises(ConfigError) as info:
        plan_from_dict(doc)
    assert info.value.path == path


def test_workers(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_workers(None) == 1
    assert resolve_workers("auto") >= 1
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_workers(None) == 3
    with pytest.raises(ConfigError):
        resolve_workers(0)


def test_load_plan_from_file(tmp_path):
    f = tmp_path / "plan.yaml"
    f.write_text("replications: 2\ngrid:\n  - scenarios: [II]\n    sizes: [[6, 4]]\n")
    plan = load_plan(f)
    assert len(plan.cells) == 1 and plan.cells[0].sample1.scales().tolist() == [3, 3, 1, 1]
    f.write_text("grid: [unclosed\n")
    with pytest.raises(ConfigError):
        load_plan(f)
