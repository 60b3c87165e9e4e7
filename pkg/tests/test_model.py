import numpy as np
import pytest

from otpath import (
    ConfigError,
    CostSpec,
    Domain,
    TargetSet,
    build_grid,
    build_problem,
    density_eval,
    gaussian_bump_density,
    integrate,
    parabola_targets,
    sample_targets,
    uniform_density,
    unit_domain,
)
from otpath.model import default_target_box, interval_mass


def test_domain_validation():
    with pytest.raises(ConfigError):
        Domain(lower=(0.0, 0.0), upper=(1.0,))
    with pytest.raises(ConfigError):
        Domain(lower=(1.0,), upper=(0.0,))
    with pytest.raises(ConfigError):
        Domain(lower=(0.0, 0.0, 0.0), upper=(1.0, 1.0, 1.0))
    dom = Domain(lower=(0.0, -1.0), upper=(2.0, 1.0))
    assert dom.volume == pytest.approx(4.0)
    assert np.allclose(dom.center, [1.0, 0.0])


def test_targets_must_be_distinct():
    with pytest.raises(ConfigError):
        TargetSet(points=np.array([[0.3], [0.3]]))
    ts = TargetSet(points=np.array([[0.3], [0.4]]))
    assert ts.n == 2 and ts.dim == 1


def test_anchor_gaps_for_p3():
    prob = build_problem(
        {"variant": "p3", "dim": 1, "targets": [[0.2], [0.8]], "anchor": [0.5]}
    )
    assert np.allclose(prob.anchor_costs, [0.09, 0.09], atol=1e-15)
    assert np.allclose(prob.offsets, prob.anchor_costs)


def test_sampled_targets_land_in_default_box():
    prob = build_problem({"variant": "p1", "dim": 1, "n_targets": 4, "seed": 7})
    pts = prob.targets.points
    assert pts.shape == (4, 1)
    assert pts.min() > 0.0 and pts.max() < 5.0
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    np.fill_diagonal(dist, np.inf)
    assert dist.min() > 0.0


def test_missing_pieces_rejected():
    with pytest.raises(ConfigError):
        build_problem({"variant": "p4", "dim": 1, "n_targets": 2, "seed": 0})
    with pytest.raises(ConfigError):
        build_problem({"variant": "p3", "dim": 1, "n_targets": 2, "seed": 0})
    with pytest.raises(ConfigError):
        build_problem({"variant": "p1", "dim": 1, "targets": [[0.1], [0.1]]})
    with pytest.raises(ConfigError):
        build_problem({"variant": "p1", "dim": 1, "targets": [[0.1, 0.2]]})
    with pytest.raises(ConfigError):
        build_problem({"variant": "p1", "dim": 1, "n_targets": 2, "seed": 0, "cost_exponent": 4})
    with pytest.raises(ConfigError):
        build_problem({"variant": "p5", "dim": 1, "n_targets": 2, "seed": 0})


def test_anchor_and_rho_only_where_meaningful():
    with pytest.raises(ConfigError):
        build_problem(
            {"variant": "p1", "dim": 1, "targets": [[0.5]], "anchor": [0.5]}
        )
    with pytest.raises(ConfigError):
        build_problem(
            {"variant": "p2", "dim": 1, "targets": [[0.5]], "rho": {"kind": "uniform"}}
        )


def test_density_values_match_printed_constants(dom1, dom2):
    uni = uniform_density(dom1)
    assert density_eval(uni, np.array([0.3])) == 1.0
    bump1 = gaussian_bump_density(dom1)
    # Peak values agree with the rounded constants at their printed precision.
    assert density_eval(bump1, np.array([0.5])) == pytest.approx(1.8305, abs=5e-5)
    bump2 = gaussian_bump_density(dom2)
    assert density_eval(bump2, np.array([0.5, 0.5])) == pytest.approx(3.3508, abs=5e-5)


def test_catalog_densities_integrate_to_one(dom1, dom2, grid1):
    # 64 panels x order 8 per axis in both dimensions
    for dom, grid in ((dom1, grid1), (dom2, build_grid(dom2, 64, 8))):
        for spec in (uniform_density(dom), gaussian_bump_density(dom)):
            total = integrate(grid, lambda x: density_eval(spec, x))
            assert abs(total - 1.0) <= 1e-4
            assert abs(total - 1.0) <= 1e-6  # exact normalization does better


def test_printed_normalization_accepted_without_warning(dom1, recwarn):
    spec = gaussian_bump_density(dom1, normalization=1.8305)
    prob = build_problem(
        {
            "variant": "p1",
            "dim": 1,
            "targets": [[0.2], [0.6]],
            "density": {"kind": "gauss", "normalization": 1.8305},
        }
    )
    assert prob.mu.normalization == 1.8305
    assert not [w for w in recwarn.list if "integrates" in str(w.message)]
    assert density_eval(spec, np.array([0.5])) == 1.8305


def test_bad_normalization_warns():
    with pytest.warns(UserWarning, match="integrates"):
        build_problem(
            {
                "variant": "p1",
                "dim": 1,
                "targets": [[0.2], [0.6]],
                "density": {"kind": "gauss", "normalization": 1.5},
            }
        )


def test_parabola_targets():
    two = parabola_targets(2).points
    assert np.allclose(two[0], [0.0, 0.0], atol=0)
    assert np.allclose(two[1], [1.0, np.e**-2], atol=1e-16)
    three = parabola_targets(3).points
    assert three[1] == pytest.approx([0.5, 0.25 * np.e**-2], abs=1e-16)
    twelve = parabola_targets(12).points
    assert np.allclose(twelve[:, 0], np.linspace(0, 1, 12), atol=0)
    # exactly on the curve, bit for bit
    assert np.array_equal(twelve[:, 1], (twelve[:, 0] / np.e) ** 2)
    with pytest.raises(ConfigError):
        parabola_targets(1)


def test_sampling_is_reproducible_and_splittable():
    box = Domain(lower=(0.0,), upper=(5.0,))
    a = sample_targets(4, 1, box, seed=3).points
    b = sample_targets(4, 1, box, seed=3).points
    assert np.array_equal(a, b)
    c = sample_targets(5, 1, box, seed=3).points
    assert c.shape == (5, 1)
    d = sample_targets(4, 1, box, seed=4).points
    assert not np.array_equal(a, d)


def test_default_target_boxes(dom1, dom2):
    box1 = default_target_box("p1", dom1)
    assert box1.lower == (0.0,) and box1.upper == (5.0,)
    box2 = default_target_box("p2", dom2)
    assert box2.upper == (1.5, 1.5)
    assert default_target_box("p3", dom1) is dom1
    assert default_target_box("p4", dom2) is dom2


def test_interval_mass_matches_quadrature(dom1, grid1):
    bump = gaussian_bump_density(dom1)
    direct = interval_mass(bump, 0.2, 0.7)
    # quadrature of the jump indicator carries O(panel width) error
    masked = integrate(
        grid1,
        lambda x: density_eval(bump, x) * ((x[:, 0] >= 0.2) & (x[:, 0] < 0.7)),
    )
    assert direct == pytest.approx(masked, abs=1e-3)
    assert interval_mass(bump, 0.7, 0.2) == 0.0
    uni = uniform_density(dom1)
    assert interval_mass(uni, 0.25, 0.75) == pytest.approx(0.5, abs=1e-15)


def test_cost_spec_restricted():
    assert CostSpec().exponent == 2.0
    assert CostSpec(exponent=3).exponent == 3.0
    with pytest.raises(ConfigError):
        CostSpec(exponent=2.5)


def test_unit_domain_shapes():
    assert unit_domain(1).dim == 1
    assert unit_domain(2).volume == pytest.approx(1.0)
