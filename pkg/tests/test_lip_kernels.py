import numpy as np
import pytest

from conftest import KIND_SETS, random_states
from fd_oracle import (FD_STEP_SINGLE, fd_block_given_rows, fd_energy_row,
                       fd_torque_block, raw_vector)
from lipgpr.gpr import noise_diagonal
from lipgpr.kernels import Polynomial
from lipgpr.lip import (FrictionKernel, InputLayout, LagrangianTorqueKernel,
                        TransformedInput, se_joint_kernel, sp_joint_kernel,
                        transform_input)
from lipgpr.robot import StateBatch, load_robot


def single(q, qd, qdd):
    return StateBatch(np.atleast_2d(q), np.atleast_2d(qd), np.atleast_2d(qdd))


def randomized_lip(kinds, rng, scale=0.4):
    k = LagrangianTorqueKernel.lip(kinds)
    k.set_theta(rng.normal(scale=scale, size=k.theta().size))
    return k


def k_pair_fn(kernel, n):
    def k_pair(x, xp):
        A = single(x[:n], x[n:2 * n], x[2 * n:])
        B = single(xp[:n], xp[n:2 * n], xp[2 * n:])
        return kernel.lagrangian_pairs(A, B)[0, 0]
    return k_pair


class TestTransform:
    def test_all_revolute_at_zero(self):
        out = transform_input(np.zeros((1, 2)), np.zeros((1, 2)),
                              np.zeros((1, 2)), ("revolute", "revolute"))
        np.testing.assert_array_equal(out.qc, [[1.0, 1.0]])
        np.testing.assert_array_equal(out.qs, [[0.0, 0.0]])
        assert out.qp.shape == (1, 0)

    def test_prismatic_passthrough(self):
        q = np.array([[0.3, -1.2, 0.8]])
        out = transform_input(q, q * 0, q * 0,
                              ("revolute", "prismatic", "revolute"))
        np.testing.assert_array_equal(out.qp, [[-1.2]])
        np.testing.assert_allclose(out.qc, np.cos(q[:, [0, 2]]))

    def test_pythagorean_identity(self):
        rng = np.random.default_rng(0)
        q = rng.uniform(-np.pi, np.pi, size=(50, 3))
        out = transform_input(q, q * 0, q * 0, KIND_SETS[3])
        np.testing.assert_allclose(out.qc ** 2 + out.qs ** 2, 1.0, atol=1e-14)


class TestLagrangianPrior:
    def test_zero_velocity_reduces_to_potential(self):
        rng = np.random.default_rng(1)
        k = randomized_lip(KIND_SETS[2], rng)
        A = single([0.3, -0.7], [0.0, 0.0], [1.0, 2.0])
        B = random_states(rng, 2, 4)
        full = k.lagrangian_pairs(A, B)
        pot = LagrangianTorqueKernel(KIND_SETS[2], lagrangian=k.potential)
        np.testing.assert_array_equal(full, pot.lagrangian_pairs(A, B))

    def test_one_dof_closed_form(self):
        # k_T1 = (qd w qd')^2 (wc c c' + ws s s' + off)^2 for one joint
        layout = InputLayout(("revolute",))
        k = LagrangianTorqueKernel.lip(("revolute",))
        rng = np.random.default_rng(2)
        theta = rng.normal(size=k.theta().size)
        k.set_theta(theta)
        names = k.param_names()
        vals = dict(zip(names, np.exp(theta)))
        q, qd = 0.4, 1.3
        qp, qdp = -0.8, -0.5
        A, B = single([q], [qd], [0.0]), single([qp], [qdp], [0.0])
        kin = LagrangianTorqueKernel(("revolute",), lagrangian=k.kinetic)
        got = kin.lagrangian_pairs(A, B)[0, 0]
        vel = vals["kT1.qd.log_weight"] * qd * qdp
        pos = (vals["kT1.j1.log_weight[0]"] * np.cos(q) * np.cos(qp)
               + vals["kT1.j1.log_weight[1]"] * np.sin(q) * np.sin(qp)
               + max(vals["kT1.j1.log_offset"], 1e-12))
        assert got == pytest.approx(vel ** 2 * pos ** 2)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        k = randomized_lip(KIND_SETS[3], rng)
        A, B = random_states(rng, 3, 3), random_states(rng, 3, 3)
        np.testing.assert_allclose(k.lagrangian_pairs(A, B),
                                   k.lagrangian_pairs(B, A).T, atol=1e-12)


class TestOperatorBlocks:
    def test_velocity_only_closed_form(self):
        # k_L = (qd w qd')^2 gives G G' k = 4 w^2 qdd qdd'
        w = 1.7
        expr = Polynomial((InputLayout(("revolute",)).qd(0),), degree=2,
                          log_offset=None, log_weights=[np.log(w)])
        k = LagrangianTorqueKernel(("revolute",), lagrangian=expr)
        blk = k.torque_block(single([0.3], [0.9], [1.3]),
                             single([-0.5], [0.4], [-2.0]))
        assert blk[0, 0] == pytest.approx(4 * w**2 * 1.3 * -2.0)

    def test_potential_only_closed_form(self):
        # unit weights: G G' k_V = sin q sin q' + cos q cos q'
        base = LagrangianTorqueKernel.lip(("revolute",))
        k = LagrangianTorqueKernel(("revolute",), lagrangian=base.potential)
        q, qp = 0.7, -0.4
        blk = k.torque_block(single([q], [0.3], [0.1]), single([qp], [-0.2], [0.5]))
        assert blk[0, 0] == pytest.approx(np.sin(q) * np.sin(qp)
                                          + np.cos(q) * np.cos(qp))

    @pytest.mark.parametrize("dof", [1, 2, 3])
    def test_matches_nested_finite_differences(self, dof):
        rng = np.random.default_rng(20 + dof)
        k = randomized_lip(KIND_SETS[dof], rng)
        k_pair = k_pair_fn(k, dof)
        for _ in range(3):
            A = random_states(rng, dof, 1, q=1.2, qd=1.5, qdd=2.0)
            B = random_states(rng, dof, 1, q=1.2, qd=1.5, qdd=2.0)
            blk = k.torque_block(A, B)
            fd = fd_torque_block(k_pair, raw_vector(A), raw_vector(B), dof)
            scale = np.abs(fd).max()
            np.testing.assert_allclose(blk, fd, atol=1e-4 * scale)

    def test_single_operator_side_at_tiny_step(self):
        # with the second-argument operator applied exactly, the remaining
        # first-argument application is second order and checks at 1e-4
        rng = np.random.default_rng(5)
        dof = 2
        k = randomized_lip(KIND_SETS[dof], rng)
        A = random_states(rng, dof, 1)
        B = random_states(rng, dof, 1)

        def row_fn(xv, j):
            Ax = single(xv[:dof], xv[dof:2 * dof], xv[2 * dof:])
            return k._operator_row(k.lagrangian, Ax, B)[j, 0, 0]

        blk = k.torque_block(A, B)
        fd = fd_block_given_rows(row_fn, raw_vector(A), raw_vector(B), dof,
                                 h=FD_STEP_SINGLE)
        np.testing.assert_allclose(blk, fd, rtol=1e-4,
                                   atol=1e-6 * np.abs(fd).max())

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(6)
        k = randomized_lip(KIND_SETS[3], rng)
        A, B = random_states(rng, 3, 4), random_states(rng, 3, 5)
        P, Pt = k.block_pairs(A, B), k.block_pairs(B, A)
        np.testing.assert_allclose(P, Pt.transpose(1, 0, 3, 2), atol=1e-11)

    def test_gram_psd(self):
        rng = np.random.default_rng(7)
        for kinds in (KIND_SETS[2], KIND_SETS[3]):
            k = randomized_lip(kinds, rng)
            A = random_states(rng, len(kinds), 40)
            G = k.gram(A)
            np.testing.assert_allclose(G, G.T, atol=1e-10)
            ev = np.linalg.eigvalsh(G)
            assert ev.min() >= -1e-8 * np.trace(G) / G.shape[0]


class TestEnergyRows:
    @pytest.mark.parametrize("which,sign", [("kinetic", 1.0), ("potential", -1.0)])
    def test_matches_finite_differences(self, which, sign):
        rng = np.random.default_rng(8)
        dof = 2
        k = randomized_lip(KIND_SETS[dof], rng)
        expr = k.kinetic if which == "kinetic" else k.potential
        part = LagrangianTorqueKernel(KIND_SETS[dof], lagrangian=expr)
        k_pair = k_pair_fn(part, dof)
        A, B = random_states(rng, dof, 1), random_states(rng, dof, 1)
        rows = k.energy_cross(which, A, B)[0]
        fd = fd_energy_row(k_pair, raw_vector(A), raw_vector(B), dof, sign=sign)
        np.testing.assert_allclose(rows, fd, rtol=1e-4, atol=1e-7)

    def test_kinetic_annihilation_is_exact(self):
        rng = np.random.default_rng(9)
        k = randomized_lip(KIND_SETS[2], rng)
        A = StateBatch(rng.normal(size=(3, 2)), np.zeros((3, 2)),
                       rng.normal(size=(3, 2)))
        B = random_states(rng, 2, 5)
        assert np.all(k.energy_cross("kinetic", A, B) == 0.0)
        assert np.all(k.energy_prior_diag("kinetic", A) == 0.0)

    def test_potential_rows_ignore_query_velocity(self):
        rng = np.random.default_rng(10)
        k = randomized_lip(KIND_SETS[2], rng)
        q = rng.normal(size=(4, 2))
        B = random_states(rng, 2, 6)
        r1 = k.energy_cross("potential",
                            StateBatch(q, rng.normal(size=(4, 2)),
                                       rng.normal(size=(4, 2))), B)
        r2 = k.energy_cross("potential",
                            StateBatch(q, rng.normal(size=(4, 2)),
                                       rng.normal(size=(4, 2))), B)
        np.testing.assert_array_equal(r1, r2)

    def test_rejects_kernels_without_energy_split(self):
        k = LagrangianTorqueKernel.lse(KIND_SETS[2])
        A = random_states(np.random.default_rng(0), 2, 2)
        with pytest.raises(ValueError):
            k.energy_cross("kinetic", A, A)


class TestFriction:
    def test_linear_feature_values(self):
        fric = FrictionKernel(2, with_se=False)
        fric.log_gv[:] = np.log([2.0, 1.0])
        fric.log_gc[:] = np.log([0.5, 1.0])
        A = single([0, 0], [1.0, 0.0], [0, 0])
        B = single([0, 0], [2.0, 0.0], [0, 0])
        vals = fric.diag_pairs(A, B)
        assert vals[0, 0, 0] == pytest.approx(2.0 * 2.0 + 0.5 * 1.0)

    def test_zero_velocity_kills_linear_part(self):
        fric = FrictionKernel(2, with_se=False)
        A = single([0.3, 0.1], [0.0, 0.0], [0, 0])
        vals = fric.diag_pairs(A, A)
        np.testing.assert_array_equal(vals, 0.0)

    def test_gram_stays_psd_with_friction(self):
        rng = np.random.default_rng(11)
        fric = FrictionKernel(2, with_se=True, raw_dim=6)
        k = LagrangianTorqueKernel.lip(KIND_SETS[2], friction=fric)
        k.set_theta(rng.normal(scale=0.3, size=k.theta().size))
        A = random_states(rng, 2, 30)
        G = k.gram(A)
        ev = np.linalg.eigvalsh(G)
        assert ev.min() >= -1e-8 * np.trace(G) / G.shape[0]


class TestBaselines:
    def test_lse_operator_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        k = LagrangianTorqueKernel.lse(KIND_SETS[2])
        k.set_theta(rng.normal(scale=0.3, size=k.theta().size))
        k_pair = k_pair_fn(k, 2)
        A = random_states(rng, 2, 1, q=1.0, qd=1.0, qdd=1.5)
        B = random_states(rng, 2, 1, q=1.0, qd=1.0, qdd=1.5)
        blk = k.torque_block(A, B)
        fd = fd_torque_block(k_pair, raw_vector(A), raw_vector(B), 2)
        np.testing.assert_allclose(blk, fd, atol=1e-4 * np.abs(fd).max())

    def test_lse_gram_psd_and_self_symmetric(self):
        rng = np.random.default_rng(13)
        k = LagrangianTorqueKernel.lse(KIND_SETS[3])
        A = random_states(rng, 3, 25)
        G = k.gram(A)
        ev = np.linalg.eigvalsh(G)
        assert ev.min() >= -1e-8 * np.trace(G) / G.shape[0]
        blk = k.torque_block(A.subset(slice(0, 1)), A.subset(slice(0, 1)))
        np.testing.assert_allclose(blk, blk.T, atol=1e-11)

    def test_sp_reduces_to_se_when_gamma_vanishes(self):
        robot = load_robot("planar_2r")
        rng = np.random.default_rng(14)
        sp_k = sp_joint_kernel(robot, 0)
        se_k = se_joint_kernel(2, 0)
        # kill the linear part, match SE parameters
        for atom in sp_k.expr.atoms():
            if isinstance(atom, Polynomial):
                atom.log_weights[:] = -200.0
        A, B = random_states(rng, 2, 5), random_states(rng, 2, 6)
        np.testing.assert_allclose(sp_k.cross(A, B), se_k.cross(A, B),
                                   atol=1e-12)

    def test_sp_gram_psd(self):
        robot = load_robot("planar_2r")
        rng = np.random.default_rng(15)
        sp_k = sp_joint_kernel(robot, 1)
        sp_k.set_theta(rng.normal(scale=0.2, size=sp_k.theta().size))
        A = random_states(rng, 2, 35)
        G = sp_k.gram(A)
        ev = np.linalg.eigvalsh(G)
        assert ev.min() >= -1e-8 * np.trace(G) / G.shape[0]

    def test_gip_is_lip_diagonal(self):
        from lipgpr.lip import JointOperatorKernel
        rng = np.random.default_rng(16)
        kinds = KIND_SETS[2]
        full = LagrangianTorqueKernel.lip(kinds)
        theta = rng.normal(scale=0.3, size=full.theta().size)
        full.set_theta(theta)
        A, B = random_states(rng, 2, 3), random_states(rng, 2, 4)
        blocks = full.block_pairs(A, B)
        for j in (0, 1):
            gip = JointOperatorKernel(kinds, j)
            gip.set_theta(theta)
            np.testing.assert_allclose(gip.cross(A, B), blocks[j, j],
                                       atol=1e-12)


class TestMultiOutputStacking:
    def test_cross_matches_blocks(self):
        rng = np.random.default_rng(17)
        k = randomized_lip(KIND_SETS[2], rng)
        A, B = random_states(rng, 2, 3), random_states(rng, 2, 4)
        M = k.cross(A, B)
        blocks = k.block_pairs(A, B)
        for s in range(3):
            for r in range(4):
                np.testing.assert_allclose(
                    M[s * 2:(s + 1) * 2, r * 2:(r + 1) * 2], blocks[:, :, s, r])

    def test_noise_layout(self):
        d = noise_diagonal([0.1, 0.2], 3)
        np.testing.assert_allclose(d, [0.01, 0.04] * 3)
