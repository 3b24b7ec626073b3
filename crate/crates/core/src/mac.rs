//! Staggered (MAC) discretisation of the Stokes operators on a voxel grid.
//!
//! Pressure lives at fluid voxel centres. The velocity component along axis
//! `a` lives on the face between voxel `v` and its forward neighbour
//! `v + e_a`, and is only a degree of freedom when both voxels are fluid;
//! every other face carries a zero normal velocity and is eliminated.
//!
//! `A` is the negative vector Laplacian scaled by `1/h^2`, `B` the negative
//! divergence scaled by `1/h`, and the driving force is a unit body force
//! along the flow axis.

use std::io::{self, Write};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{check_len, CsrMatrix};
use crate::scalar::Scalar;
use crate::voxgeo::{connected_components, VoxelGrid};

/// Numbering of velocity and pressure unknowns.
///
/// Velocity DOFs are ordered axis-major, then by the linear index of the
/// face's lower voxel. Pressure DOFs follow the voxel order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    dim: usize,
    n_voxels: usize,
    axis_start: [usize; 4],
    face_voxel: Vec<usize>,
    face_dof: Vec<Option<usize>>,
    pressure_voxel: Vec<usize>,
    voxel_dof: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(grid: &VoxelGrid) -> Self {
        let dim = grid.dim();
        let nv = grid.len();
        let mut face_dof = vec![None; dim * nv];
        let mut face_voxel = Vec::new();
        let mut axis_start = [0; 4];
        for a in 0..dim {
            axis_start[a] = face_voxel.len();
            for v in 0..nv {
                if grid.is_fluid(v) && grid.is_fluid(grid.neighbor(v, a, true)) {
                    face_dof[a * nv + v] = Some(face_voxel.len());
                    face_voxel.push(v);
                }
            }
        }
        for s in axis_start.iter_mut().skip(dim) {
            *s = face_voxel.len();
        }
        let mut voxel_dof = vec![None; nv];
        let mut pressure_voxel = Vec::new();
        for v in 0..nv {
            if grid.is_fluid(v) {
                voxel_dof[v] = Some(pressure_voxel.len());
                pressure_voxel.push(v);
            }
        }
        Self {
            dim,
            n_voxels: nv,
            axis_start,
            face_voxel,
            face_dof,
            pressure_voxel,
            voxel_dof,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of velocity unknowns.
    pub fn m_u(&self) -> usize {
        self.face_voxel.len()
    }

    /// Number of pressure unknowns (fluid voxels).
    pub fn m_p(&self) -> usize {
        self.pressure_voxel.len()
    }

    /// Velocity DOFs of one axis as a contiguous range.
    pub fn axis_range(&self, axis: usize) -> Range<usize> {
        self.axis_start[axis]..self.axis_start[axis + 1]
    }

    /// Velocity DOF on the face between `voxel` and its forward neighbour
    /// along `axis`, or `None` when eliminated.
    pub fn velocity_dof(&self, axis: usize, voxel: usize) -> Option<usize> {
        self.face_dof[axis * self.n_voxels + voxel]
    }

    /// `(axis, lower voxel)` of velocity DOF `k`.
    pub fn face(&self, k: usize) -> (usize, usize) {
        let axis = (0..self.dim).rev().find(|&a| k >= self.axis_start[a]).unwrap_or(0);
        (axis, self.face_voxel[k])
    }

    pub fn pressure_dof(&self, voxel: usize) -> Option<usize> {
        self.voxel_dof[voxel]
    }

    pub fn pressure_voxel(&self, j: usize) -> usize {
        self.pressure_voxel[j]
    }
}

/// Checks skipped by [`assemble_with`]; only meant for degenerate test
/// harnesses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AssembleOptions {
    pub allow_no_solid: bool,
    pub allow_disconnected: bool,
}

/// Discrete Stokes operators for one geometry and flow direction.
#[derive(Clone, Debug)]
pub struct StaggeredSystem<T> {
    dofs: DofMap,
    n: usize,
    a: CsrMatrix<T>,
    b: CsrMatrix<T>,
    bt: CsrMatrix<T>,
    diag_a: Vec<T>,
    h: T,
    flow_dir: usize,
    f: Vec<T>,
}

/// Assembles the system after checking that the problem is well posed.
pub fn assemble<T: Scalar>(grid: &VoxelGrid, flow_dir: usize) -> Result<StaggeredSystem<T>> {
    assemble_with(grid, flow_dir, AssembleOptions::default())
}

pub fn assemble_with<T: Scalar>(grid: &VoxelGrid, flow_dir: usize, opts: AssembleOptions) -> Result<StaggeredSystem<T>> {
    let dim = grid.dim();
    if flow_dir >= dim {
        return Err(Error::InvalidParams(format!("flow_dir {flow_dir} out of range for dim {dim}")));
    }
    let n_fluid = grid.fluid_count();
    if n_fluid == 0 {
        return Err(Error::EmptyFluid);
    }
    if n_fluid == grid.len() && !opts.allow_no_solid {
        return Err(Error::NoSolid);
    }
    if !opts.allow_disconnected {
        let comps = connected_components(grid);
        if comps.count > 1 {
            return Err(Error::Disconnected(comps.count));
        }
    }

    let dofs = DofMap::new(grid);
    let n = grid.n();
    let nv = grid.len();
    let h = T::one() / T::from_count(n);
    let inv_h = T::from_count(n);
    let inv_h2 = inv_h * inv_h;
    let m_u = dofs.m_u();
    let m_p = dofs.m_p();

    let mut a_trip = Vec::with_capacity(m_u * (2 * dim + 1));
    let mut b_trip = Vec::with_capacity(2 * m_u);
    for k in 0..m_u {
        let (a, v) = dofs.face(k);
        let mut diag = 0usize;
        for b in 0..dim {
            for forward in [false, true] {
                let w = grid.neighbor(v, b, forward);
                if let Some(j) = dofs.velocity_dof(a, w) {
                    a_trip.push((k, j, -inv_h2));
                    diag += 1;
                } else if b == a {
                    // Blocked face one step along the velocity line: Dirichlet 0.
                    diag += 1;
                } else {
                    let w_hi = grid.neighbor(w, a, true);
                    let solid = usize::from(!grid.is_fluid(w)) + usize::from(!grid.is_fluid(w_hi));
                    // Wall halfway between the lines reflects the ghost value;
                    // an obstacle corner puts the wall on the line itself.
                    diag += if solid == 2 { 2 } else { 1 };
                }
            }
        }
        a_trip.push((k, k, T::from_count(diag) * inv_h2));

        let lo = dofs.pressure_dof(v).expect("face voxel is fluid");
        let hi = dofs.pressure_dof(grid.neighbor(v, a, true)).expect("face voxel is fluid");
        b_trip.push((lo, k, -inv_h));
        b_trip.push((hi, k, inv_h));
    }
    let a_mat = CsrMatrix::from_triplets(m_u, m_u, a_trip);
    let b_mat = CsrMatrix::from_triplets(m_p, m_u, b_trip);
    let bt = b_mat.transpose();
    let diag_a = a_mat.diagonal();
    let mut f = vec![T::zero(); m_u];
    for x in &mut f[dofs.axis_range(flow_dir)] {
        *x = T::one();
    }
    debug_assert_eq!(nv, grid.len());
    Ok(StaggeredSystem {
        dofs,
        n,
        a: a_mat,
        b: b_mat,
        bt,
        diag_a,
        h,
        flow_dir,
        f,
    })
}

impl<T: Scalar> StaggeredSystem<T> {
    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn dim(&self) -> usize {
        self.dofs.dim
    }

    /// Voxels per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m_u(&self) -> usize {
        self.dofs.m_u()
    }

    pub fn m_p(&self) -> usize {
        self.dofs.m_p()
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn flow_dir(&self) -> usize {
        self.flow_dir
    }

    /// Unit body force along the flow axis.
    pub fn force(&self) -> &[T] {
        &self.f
    }

    pub fn diag_a(&self) -> &[T] {
        &self.diag_a
    }

    pub fn a(&self) -> &CsrMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &CsrMatrix<T> {
        &self.b
    }

    pub fn bt(&self) -> &CsrMatrix<T> {
        &self.bt
    }

    pub fn apply_a(&self, u: &[T], out: &mut [T]) -> Result<()> {
        check_len(self.m_u(), out.len())?;
        self.a.matvec(u, out)
    }

    pub fn apply_b(&self, u: &[T], out: &mut [T]) -> Result<()> {
        check_len(self.m_p(), out.len())?;
        self.b.matvec(u, out)
    }

    pub fn apply_bt(&self, p: &[T], out: &mut [T]) -> Result<()> {
        check_len(self.m_u(), out.len())?;
        self.bt.matvec(p, out)
    }

    /// Sparse `B diag(A)^{-1} B^T`, the SIMPLE pressure operator.
    pub fn simple_schur(&self) -> CsrMatrix<T> {
        let m_p = self.m_p();
        let mut trip = Vec::with_capacity(m_p * (2 * self.dim() + 1));
        for i in 0..m_p {
            let (cols, vals) = self.b.row(i);
            for (&k, &bik) in cols.iter().zip(vals) {
                let (rows, bvals) = self.bt.row(k);
                let s = bik / self.diag_a[k];
                for (&j, &bjk) in rows.iter().zip(bvals) {
                    trip.push((i, j, s * bjk));
                }
            }
        }
        CsrMatrix::from_triplets(m_p, m_p, trip)
    }

    /// Darcy velocity along the flow axis: the sum of that component over
    /// its faces divided by the voxel count (each face stands for one
    /// voxel volume of a unit domain).
    pub fn permeability(&self, u: &[T]) -> Result<T> {
        check_len(self.m_u(), u.len())?;
        let mut s = T::zero();
        for &x in &u[self.dofs.axis_range(self.flow_dir)] {
            s += x;
        }
        Ok(s / T::from_count(self.dofs.n_voxels))
    }

    /// Writes `A` as `row col value` triplets.
    pub fn export_a<W: Write>(&self, w: W) -> io::Result<()> {
        self.a.write_triplets(w)
    }

    /// Writes `B` as `row col value` triplets.
    pub fn export_b<W: Write>(&self, w: W) -> io::Result<()> {
        self.b.write_triplets(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::voxgeo::{generate_packing, PackingParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channel(n: usize, w: usize) -> VoxelGrid {
        VoxelGrid::from_fn(2, n, |c| c[1] >= 1 && c[1] <= w).unwrap()
    }

    fn packing() -> VoxelGrid {
        generate_packing(&PackingParams::new_2d(2, 12, 4, 2, 7)).unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn dof_counts() {
        let g = packing();
        let sys = assemble::<f64>(&g, 0).unwrap();
        assert_eq!(sys.m_p(), g.fluid_count());
        let mut faces = 0;
        for a in 0..2 {
            for v in 0..g.len() {
                if g.is_fluid(v) && g.is_fluid(g.neighbor(v, a, true)) {
                    faces += 1;
                }
            }
        }
        assert_eq!(sys.m_u(), faces);
        for k in 0..sys.m_u() {
            let (a, v) = sys.dofs().face(k);
            assert_eq!(sys.dofs().velocity_dof(a, v), Some(k));
        }
    }

    #[test]
    fn channel_diagonal() {
        let n = 16;
        let sys = assemble::<f64>(&channel(n, 5), 0).unwrap();
        let h2 = 1.0 / (n * n) as f64;
        let g = channel(n, 5);
        for k in sys.dofs().axis_range(0) {
            let (_, v) = sys.dofs().face(k);
            let y = g.coords(v)[1];
            let want = if y == 1 || y == 5 { 5.0 } else { 4.0 };
            assert!((sys.diag_a()[k] * h2 - want).abs() < 1e-12, "y={y}");
        }
        assert!(sys.dofs().axis_range(1).len() == n * 4);
    }

    #[test]
    fn adjointness() {
        let sys = assemble::<f64>(&packing(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = rand_vec(&mut rng, sys.m_u());
            let p = rand_vec(&mut rng, sys.m_p());
            let mut bu = vec![0.0; sys.m_p()];
            let mut btp = vec![0.0; sys.m_u()];
            sys.apply_b(&u, &mut bu).unwrap();
            sys.apply_bt(&p, &mut btp).unwrap();
            let lhs = dot(&bu, &p);
            let rhs = dot(&u, &btp);
            let scale = dot(&u, &u).sqrt() * dot(&p, &p).sqrt();
            assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let sys = assemble::<f64>(&packing(), 0).unwrap();
        let mut out = vec![1.0; sys.m_u()];
        sys.apply_bt(&vec![3.5; sys.m_p()], &mut out).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn symmetric_and_positive() {
        let sys = assemble::<f64>(&packing(), 0).unwrap();
        let norm_a = (0..sys.m_u())
            .map(|r| sys.a().row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut au = vec![0.0; sys.m_u()];
        let mut av = vec![0.0; sys.m_u()];
        for _ in 0..50 {
            let u = rand_vec(&mut rng, sys.m_u());
            let v = rand_vec(&mut rng, sys.m_u());
            sys.apply_a(&u, &mut au).unwrap();
            sys.apply_a(&v, &mut av).unwrap();
            let scale = norm_a * dot(&u, &u).sqrt() * dot(&v, &v).sqrt();
            assert!((dot(&au, &v) - dot(&u, &av)).abs() <= 1e-12 * scale);
            assert!(dot(&u, &au) > 0.0);
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let sys = assemble::<f64>(&packing(), 0).unwrap();
        let mut out = vec![1.0; sys.m_u()];
        sys.apply_a(&vec![0.0; sys.m_u()], &mut out).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
        let mut out = vec![1.0; sys.m_p()];
        sys.apply_b(&vec![0.0; sys.m_u()], &mut out).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn torus_harness() {
        let g = VoxelGrid::filled(2, 6, true).unwrap();
        assert_eq!(assemble::<f64>(&g, 0).unwrap_err(), Error::NoSolid);
        let opts = AssembleOptions {
            allow_no_solid: true,
            allow_disconnected: false,
        };
        let sys = assemble_with::<f64>(&g, 0, opts).unwrap();
        let u: Vec<f64> = sys.force().to_vec();
        let mut div = vec![1.0; sys.m_p()];
        sys.apply_b(&u, &mut div).unwrap();
        assert!(div.iter().all(|&x| x == 0.0));
        let c: Vec<f64> = u.iter().map(|x| 2.5 * x).collect();
        assert!((sys.permeability(&c).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn disconnected_rejected() {
        let g = VoxelGrid::from_fn(2, 8, |c| c[0] != 0 && c[0] != 4).unwrap();
        assert_eq!(assemble::<f64>(&g, 1).unwrap_err(), Error::Disconnected(2));
    }

    #[test]
    fn bad_lengths_and_axis() {
        let sys = assemble::<f64>(&packing(), 0).unwrap();
        let mut out = vec![0.0; sys.m_u()];
        assert!(matches!(sys.apply_a(&[1.0], &mut out), Err(Error::LengthMismatch { .. })));
        let mut short = vec![0.0; 3];
        assert!(sys.apply_bt(&vec![0.0; sys.m_p()], &mut short).is_err());
        assert!(assemble::<f64>(&packing(), 2).is_err());
    }

    #[test]
    fn simple_schur_matches_product() {
        let sys = assemble::<f64>(&packing(), 0).unwrap();
        let s = sys.simple_schur();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = rand_vec(&mut rng, sys.m_p());
        let mut w = vec![0.0; sys.m_u()];
        sys.apply_bt(&p, &mut w).unwrap();
        for (x, d) in w.iter_mut().zip(sys.diag_a()) {
            *x /= d;
        }
        let mut want = vec![0.0; sys.m_p()];
        sys.apply_b(&w, &mut want).unwrap();
        let got = s.mul_vec(&p).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn simple_schur_interior_stencil() {
        // Solid frame around a 4x4 fluid block in the middle of a 6x6 torus.
        let g = VoxelGrid::from_fn(2, 6, |c| (1..5).contains(&c[0]) && (1..5).contains(&c[1])).unwrap();
        let sys = assemble::<f64>(&g, 0).unwrap();
        let s = sys.simple_schur();
        for j in 0..sys.m_p() {
            let c = g.coords(sys.dofs().pressure_voxel(j));
            for i in 0..sys.m_p() {
                let d = g.coords(sys.dofs().pressure_voxel(i));
                let dist = c[0].abs_diff(d[0]) + c[1].abs_diff(d[1]);
                // Pressure Neumann graph Laplacian weighted by 1/diag(A) per face.
                let mut want = 0.0;
                if i == j {
                    for a in 0..2 {
                        for fwd in [false, true] {
                            let nb = g.neighbor(sys.dofs().pressure_voxel(j), a, fwd);
                            if g.is_fluid(nb) {
                                let lo = if fwd { sys.dofs().pressure_voxel(j) } else { nb };
                                let k = sys.dofs().velocity_dof(a, lo).unwrap();
                                want += 36.0 / sys.diag_a()[k];
                            }
                        }
                    }
                } else if dist == 1 {
                    let a = if c[0] != d[0] { 0 } else { 1 };
                    let lo = if c[a] < d[a] { sys.dofs().pressure_voxel(j) } else { sys.dofs().pressure_voxel(i) };
                    let k = sys.dofs().velocity_dof(a, lo).unwrap();
                    want = -36.0 / sys.diag_a()[k];
                }
                assert!((s.get(i, j) - want).abs() < 1e-12, "({i},{j})");
            }
        }
        // Far from walls every face has diag 4/h^2, giving h^2/4 times the
        // five-point Laplacian scaled by 1/h^2: centre 1, neighbours -1/4.
        let g = VoxelGrid::from_fn(2, 12, |c| c[0] != 0 || c[1] != 0).unwrap();
        let sys = assemble::<f64>(&g, 0).unwrap();
        let s = sys.simple_schur();
        let centre = sys.dofs().pressure_dof(g.index([6, 6, 0])).unwrap();
        let east = sys.dofs().pressure_dof(g.index([7, 6, 0])).unwrap();
        assert!((s.get(centre, centre) - 1.0).abs() < 1e-12);
        assert!((s.get(centre, east) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn export_is_sorted_triplets() {
        let sys = assemble::<f64>(&channel(6, 2), 0).unwrap();
        let mut buf = Vec::new();
        sys.export_a(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let keys: Vec<(usize, usize)> = text
            .lines()
            .map(|l| {
                let mut it = l.split(' ');
                (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
            })
            .collect();
        assert_eq!(keys.len(), sys.a().nnz());
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let mut buf = Vec::new();
        sys.export_b(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2 * sys.m_u());
    }

    #[test]
    fn three_d_channel() {
        let g = VoxelGrid::from_fn(3, 6, |c| (1..4).contains(&c[1]) && (1..4).contains(&c[2])).unwrap();
        let sys = assemble::<f64>(&g, 0).unwrap();
        let h2 = 1.0 / 36.0;
        for k in sys.dofs().axis_range(0) {
            let c = g.coords(sys.dofs().face(k).1);
            let walls = usize::from(c[1] == 1 || c[1] == 3) + usize::from(c[2] == 1 || c[2] == 3);
            assert!((sys.diag_a()[k] * h2 - (6 + walls) as f64).abs() < 1e-12);
        }
    }

    fn arb_grid() -> impl Strategy<Value = VoxelGrid> {
        (2usize..=3, 3usize..=6, any::<u64>()).prop_filter_map("needs fluid and solid", |(dim, n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = VoxelGrid::from_fn(dim, n, |_| rng.gen_bool(0.7)).ok()?;
            if g.fluid_count() == 0 {
                return None;
            }
            let (g, _) = crate::voxgeo::enforce_connectivity(&g);
            (g.fluid_count() < g.len()).then_some(g)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prop_operator_invariants(g in arb_grid(), dir in 0usize..3) {
            let dir = dir % g.dim();
            let sys = assemble::<f64>(&g, dir).unwrap();
            let h2 = sys.h() * sys.h();
            let d = g.dim() as f64;
            for &x in sys.diag_a() {
                prop_assert!(x * h2 >= 2.0 * d - 1e-12 && x * h2 <= 3.0 * d + 1e-12);
            }
            let a = sys.a();
            for r in 0..a.nrows() {
                let (cols, vals) = a.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    prop_assert_eq!(a.get(c, r), v);
                }
            }
            let mut out = vec![0.0; sys.m_u()];
            sys.apply_bt(&vec![1.0; sys.m_p()], &mut out).unwrap();
            prop_assert!(out.iter().all(|&x| x == 0.0));
            prop_assert_eq!(sys.m_p(), g.fluid_count());
        }
    }
}
