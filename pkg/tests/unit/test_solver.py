import math
from pathlib import Path

import numpy as np
import pytest

from app.core.exceptions import InvalidParameterError, UnsupportedConstraintError
from app.services import solver
from app.services.constraints import AffineConstraint, ConstraintSet
from app.services.game import ActionSpace, MixedProfile, game_from_arrays
from app.services.projection import project_simplex
from app.services.solver import SolverParams, SolverState, Trajectory, TrajectoryRow
from tests.conftest import compile_routing, make_potential_game, make_single_player_game, single_constraint
from tests.unit.test_constraints import NormBall


def constant_game(value: float = 1.0, actions: int = 2):
    return make_single_player_game([value] * actions)


class TestSolverParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"mu": 0.0},
            {"mu": -1.0},
            {"mu": 0.1, "eta": 0.0},
            {"mu": 0.1, "iterations": -1},
            {"mu": 0.1, "record_every": 0},
            {"mu": 0.1, "step_rule": "adaptive"},
            {"mu": 0.1, "init": "corner"},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidParameterError):
            SolverParams(**kwargs)

    def test_defaults(self):
        params = SolverParams(mu=0.1)
        assert params.eta is None
        assert params.step_rule == "smoothness"
        assert params.init == "uniform"


class TestMultipliers:
    def test_closed_form(self):
        # g(x) = (1, 1) . x - 0.6 = 0.4 at any x
        cs = single_constraint([1.0, 1.0], 0.6)
        x = MixedProfile(([0.5, 0.5],))
        lam = solver.multiplier_step(cs, x, 0.1)
        assert lam[0].tolist() == pytest.approx([2.0])

    def test_inactive_constraint_gives_zero(self):
        cs = single_constraint([1.0, 1.0], 2.0)
        lam = solver.multiplier_step(cs, MixedProfile(([0.5, 0.5],)), 0.1)
        assert lam[0].tolist() == [0.0]

    def test_rejects_non_positive_mu(self):
        with pytest.raises(InvalidParameterError):
            solver.multiplier_step(single_constraint([1.0, 1.0], 0.6), MixedProfile(([0.5, 0.5],)), 0.0)

    def test_lambda_max_on_routing_instance(self):
        _, cs = compile_routing()
        assert solver.lambda_max(cs, 1e-4) == pytest.approx(math.sqrt(5) * 8 / 2e-4)
        assert solver.lambda_max(ConstraintSet.empty(2), 1e-4) == 0.0


class TestPhi:
    def test_penalized_value(self):
        game = constant_game(1.0)
        cs = single_constraint([1.0, 1.0], 0.6)
        x = MixedProfile(([0.5, 0.5],))
        assert solver.phi(game, cs, x, 0.1) == pytest.approx(1.4)

    def test_matches_lagrangian_at_optimal_multipliers(self, rng):
        game = make_potential_game(rng, (3, 2))
        cs = ConstraintSet((
            (single_constraint([1.0, 0.0, 2.0], 0.5).per_player[0][0],),
            (single_constraint([0.0, 3.0], 1.0).per_player[0][0],),
        ))
        x = MixedProfile.dirichlet(game.space, seed=5)
        lam = solver.multiplier_step(cs, x, 0.05)
        assert solver.phi(game, cs, x, 0.05) == pytest.approx(solver.lagrangian(game, cs, x, lam, 0.05))

    def test_feasible_point_has_no_penalty(self, routing_game):
        game, cs = routing_game
        x = MixedProfile.pure(game.space, [0] * 5)
        assert solver.phi(game, cs, x, 1e-4) == game.potential_value(x)

    def test_gradient_adds_weighted_constraint_gradient(self):
        game = make_single_player_game([0.0, 1.0])
        cs = single_constraint([1.0, 3.0], 1.5)
        x = MixedProfile(([0.5, 0.5],))
        grad = solver.phi_gradient(game, cs, x, 0.25)
        # g = 0.5, lambda = 1
        assert grad[0].tolist() == pytest.approx([1.0, 4.0])


class TestIgdStep:
    def test_hand_example(self, tiny_game):
        params = SolverParams(mu=1.0, eta=0.1)
        state = SolverState.initial(MixedProfile(([0.5, 0.5],)), ConstraintSet.empty(1))
        nxt = solver.igd_step(tiny_game, ConstraintSet.empty(1), state, params)
        assert nxt.x[0].tolist() == pytest.approx([0.55, 0.45])
        assert nxt.iteration == 1

    def test_zero_gradient_fixed_point(self):
        game = constant_game(3.0, actions=3)
        cs = ConstraintSet.empty(1)
        x = MixedProfile(([0.2, 0.3, 0.5],))
        nxt = solver.igd_step(game, cs, SolverState.initial(x, cs), SolverParams(mu=1.0, eta=0.5))
        assert nxt.x[0].tolist() == pytest.approx([0.2, 0.3, 0.5])
        assert nxt.multipliers[0].size == 0

    def test_multipliers_are_refreshed(self):
        game = constant_game(0.0)
        cs = single_constraint([1.0, 1.0], 0.6)
        x = MixedProfile(([0.5, 0.5],))
        nxt = solver.igd_step(game, cs, SolverState.initial(x, cs), SolverParams(mu=0.1, eta=0.01))
        assert nxt.multipliers[0].tolist() == pytest.approx([2.0])

    def test_cost_and_potential_gradients_give_the_same_step(self, rng):
        for _ in range(10):
            game = make_potential_game(rng, (3, 2, 3))
            cs = ConstraintSet.empty(3)
            x = MixedProfile.dirichlet(game.space, seed=int(rng.integers(1 << 30)))
            eta = 0.3
            nxt = solver.igd_step(game, cs, SolverState.initial(x, cs), SolverParams(mu=1.0, eta=eta))
            for i in range(3):
                expected = project_simplex(x[i] - eta * game.potential_grad(i, x))
                assert np.allclose(nxt.x[i], expected, atol=1e-12)

    def test_players_step_from_the_same_iterate(self, rng):
        game = make_potential_game(rng, (2, 2))
        cs = ConstraintSet.empty(2)
        x = MixedProfile(([0.5, 0.5], [0.5, 0.5]))
        nxt = solver.igd_step(game, cs, SolverState.initial(x, cs), SolverParams(mu=1.0, eta=0.1))
        expected = project_simplex(x[1] - 0.1 * game.cost_grad(1, x))
        assert np.allclose(nxt.x[1], expected)


class TestStepSizes:
    def test_explicit_eta_wins(self, routing_game):
        game, cs = routing_game
        assert solver.step_size(game, cs, SolverParams(mu=1e-4, eta=0.005)) == 0.005

    def test_smoothness_bound_unconstrained_routing(self):
        game, cs = compile_routing(13)
        # (sum |A_j| - min |A_j|) (Phi_max - Phi_min) / 2 = 16 * 58.5 / 2
        assert solver.smoothness_bound(game, cs, 1e-3) == pytest.approx(468.0)
        assert solver.step_size(game, cs, SolverParams(mu=1e-3)) == pytest.approx(1 / 468.0)

    def test_smoothness_bound_counts_active_constraints(self):
        game, cs = compile_routing(2)
        centred = np.array([2.0, 3.0, 4.0, 10.0]) - 4.75
        expected = 468.0 + float(centred @ centred) / (2 * 1e-4)
        assert solver.smoothness_bound(game, cs, 1e-4) == pytest.approx(expected)

    def test_smoothness_floor(self, tiny_game):
        assert solver.smoothness_bound(tiny_game, ConstraintSet.empty(1), 1.0) == 1.0

    def test_smoothness_needs_affine_constraints(self):
        game = constant_game(1.0, actions=3)
        with pytest.raises(UnsupportedConstraintError):
            solver.smoothness_bound(game, ConstraintSet(((NormBall(0.5),),)), 0.1)

    def test_lemma_step_size(self, routing_game):
        game, cs = routing_game
        assert solver.lemma_step_size(game, cs, 1e-4) == pytest.approx(1e-4 / (4 * (5 * 4 * 60.0) ** 2))
        params = SolverParams(mu=1e-4, step_rule="lemma")
        assert solver.step_size(game, cs, params) == solver.lemma_step_size(game, cs, 1e-4)

    def test_lemma_step_with_curved_constraints(self):
        game = constant_game(1.0, actions=3)
        cs = ConstraintSet(((NormBall(0.5),),))
        with pytest.raises(UnsupportedConstraintError):
            solver.lemma_step_size(game, cs, 0.1)

    def test_lemma_undefined_for_zero_potential(self):
        with pytest.raises(InvalidParameterError):
            solver.lemma_step_size(constant_game(0.0), ConstraintSet.empty(1), 0.1)

    def test_recommended_T_on_routing_instance(self, routing_game):
        game, cs = routing_game
        lam = math.sqrt(5) * 8 / 2e-4
        expected = 32 / (0.01 ** 2 * 1e-4) * (60 + lam * math.sqrt(5) * 8) * (5 * 4) ** 2
        assert solver.recommended_T(game, cs, SolverParams(mu=1e-4), 0.01) == pytest.approx(expected, rel=1e-9)
        assert solver.recommended_T(game, cs, SolverParams(mu=1e-4), 0.01) == pytest.approx(2.048e18, rel=1e-3)

    def test_recommended_T_rejects_bad_eps(self, routing_game):
        game, cs = routing_game
        with pytest.raises(InvalidParameterError):
            solver.recommended_T(game, cs, SolverParams(mu=1e-4), 0.0)


class TestGradientMapping:
    def test_zero_at_fixed_point(self, tiny_game):
        x = MixedProfile(([1.0, 0.0],))
        assert solver.gradient_mapping_norm(tiny_game, ConstraintSet.empty(1), x, SolverParams(mu=1.0, eta=0.1)) == 0.0

    def test_positive_away_from_fixed_point(self, tiny_game):
        x = MixedProfile(([0.5, 0.5],))
        norm = solver.gradient_mapping_norm(tiny_game, ConstraintSet.empty(1), x, SolverParams(mu=1.0, eta=0.1))
        assert norm == pytest.approx(math.sqrt(2) * 0.05 / 0.1)


class TestTrajectory:
    def _row(self, t):
        x = MixedProfile(([1.0],))
        return TrajectoryRow(t, x, (), 0.5, 0.5, 0.0, 0.0, 0.0, 0.125)

    def test_timestamps_increase(self):
        trajectory = Trajectory()
        trajectory.append(self._row(0))
        trajectory.append(self._row(5))
        with pytest.raises(InvalidParameterError):
            trajectory.append(self._row(5))
        assert trajectory.column("t").tolist() == [0.0, 5.0]

    def test_unknown_column(self):
        with pytest.raises(KeyError):
            Trajectory().column("loss")

    def test_csv(self, tmp_path: Path):
        trajectory = Trajectory()
        trajectory.append(self._row(0))
        path = trajectory.to_csv(tmp_path / "t.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(solver.TRAJECTORY_COLUMNS)
        assert lines[1] == "0,0.5,0.5,0.0,0.0,0.0,0.125"


class TestRun:
    def test_zero_iterations(self, tiny_game):
        result = solver.run(tiny_game, ConstraintSet.empty(1), None, SolverParams(mu=1.0, iterations=0))
        assert len(result.trajectory) == 1
        assert result.trajectory[0].t == 0
        assert result.best.iteration == 0
        assert result.max_ascent == 0.0

    def test_converges_on_tiny_game(self, tiny_game):
        result = solver.run(tiny_game, ConstraintSet.empty(1), None, SolverParams(mu=1.0, iterations=5, record_every=1))
        assert [row.t for row in result.trajectory] == [0, 1, 2, 3, 4, 5]
        assert result.final.x[0].tolist() == pytest.approx([1.0, 0.0])
        assert result.trajectory[-1].nash_gap == pytest.approx(0.0)
        assert result.trajectory[0].nash_gap == pytest.approx(0.5)
        assert result.best_displacement == 0.0
        assert result.descent_violations == 0

    def test_records_every_stride_and_last(self, tiny_game):
        params = SolverParams(mu=1.0, eta=0.01, iterations=25, record_every=10)
        result = solver.run(tiny_game, ConstraintSet.empty(1), None, params)
        assert [row.t for row in result.trajectory] == [0, 10, 20, 25]

    def test_best_displacement_never_grows_with_more_iterations(self, rng):
        game = make_potential_game(rng, (2, 3))
        cs = ConstraintSet(((), (AffineConstraint(np.array([1.0, 2.0, 3.0]), 1.5),)))
        witnesses = []
        for T in range(0, 61, 3):
            params = SolverParams(mu=0.05, eta=0.02, iterations=T, record_every=1)
            result = solver.run(game, cs, None, params)
            # min over every step displacement taken from x^0 .. x^T
            assert result.best_displacement == result.trajectory.column("displacement").min()
            witnesses.append(result.best_displacement)
        assert all(later <= earlier for earlier, later in zip(witnesses, witnesses[1:]))

    def test_row_multipliers_produced_the_iterate(self):
        game = constant_game(0.0)
        cs = single_constraint([1.0, 1.0], 0.6)
        params = SolverParams(mu=0.1, eta=0.01, iterations=2, record_every=1)
        result = solver.run(game, cs, None, params)
        assert result.trajectory[0].multipliers[0].tolist() == [0.0]
        assert result.trajectory[1].multipliers[0].tolist() == pytest.approx([2.0])
        assert result.trajectory[1].lambda_sum == pytest.approx(2.0)

    def test_descent_with_smoothness_rule(self, rng):
        for _ in range(5):
            game = make_potential_game(rng, (3, 3))
            cs = ConstraintSet((
                (single_constraint([1.0, 2.0, 3.0], 1.5).per_player[0][0],),
                (),
            ))
            params = SolverParams(mu=0.05, iterations=300, record_every=50, init="dirichlet",
                                  seed=int(rng.integers(1 << 30)))
            result = solver.run(game, cs, None, params)
            assert result.descent_violations == 0
            assert result.max_ascent <= 1e-8
            phis = result.trajectory.column("phi")
            assert np.all(np.diff(phis) <= 1e-8)

    def test_large_step_is_reported(self, caplog):
        # each player alone improves from (1, 1), moving together raises the potential
        potential = np.array([[3.0, 0.0], [0.0, 1.0]])
        game = game_from_arrays(potential, np.stack([potential, potential]))
        params = SolverParams(mu=1.0, eta=50.0, iterations=4, record_every=1)
        with caplog.at_level("WARNING", logger="app.services.solver"):
            result = solver.run(game, ConstraintSet.empty(2), MixedProfile.pure(game.space, [1, 1]), params)
        assert result.trajectory.column("phi").tolist() == [1.0, 3.0, 1.0, 3.0, 1.0]
        assert result.descent_violations == 2
        assert result.max_ascent == 2.0
        assert "phi increased" in caplog.text

    def test_deterministic(self):
        game, cs = compile_routing(13)
        params = SolverParams(mu=1e-3, iterations=50, record_every=10, init="dirichlet", seed=4)
        a = solver.run(game, cs, None, params)
        b = solver.run(game, cs, None, params)
        assert [r.values() for r in a.trajectory] == [r.values() for r in b.trajectory]

    def test_rejects_invalid_start(self, tiny_game):
        with pytest.raises(ValueError):
            solver.run(tiny_game, ConstraintSet.empty(1), MixedProfile(([0.9, 0.9],)), SolverParams(mu=1.0))

    def test_initial_profile(self):
        space = ActionSpace((3, 2))
        assert solver.initial_profile(space, SolverParams(mu=1.0)).flatten().tolist() == pytest.approx(
            [1 / 3, 1 / 3, 1 / 3, 0.5, 0.5]
        )
        a = solver.initial_profile(space, SolverParams(mu=1.0, init="dirichlet", seed=9))
        b = solver.initial_profile(space, SolverParams(mu=1.0, init="dirichlet", seed=9))
        assert a.distance(b) == 0.0
