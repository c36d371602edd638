//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

pub fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

pub fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

pub fn mult_order(a: u64, p: u64) -> u64 {
    (1..p).find(|&k| pow_mod(a, k, p) == 1).unwrap()
}

/// Rank of a matrix over `F_p` by plain Gaussian elimination.
pub fn rank_mod(p: u64, rows: &[Vec<u64>]) -> usize {
    let mut m: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|x| x % p).collect()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&r| m[r][c] != 0) else { continue };
        m.swap(rank, piv);
        let inv = inv_mod(m[rank][c], p);
        for x in &mut m[rank] {
            *x = *x * inv % p;
        }
        for r in 0..m.len() {
            if r != rank && m[r][c] != 0 {
                let f = m[r][c];
                let pivot = m[rank].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot) {
                    *x = (*x + p * p - f * y % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// The finite tame quotient `<τ> ⋊ <σ>` with `|τ| = p`, `|σ| = p·ord_p(2)` and
/// `στσ⁻¹ = τ²`, acting on trace-zero matrices `(x y; z -x)` through
/// `σ ↦ diag(2, 1)`, `τ ↦ 1`. Elements are pairs `(a, b)` for `τ^a σ^b`.
pub struct TameQuotient {
    pub p: u64,
    pub sigma_order: u64,
}

impl TameQuotient {
    pub fn new(p: u64) -> Self {
        TameQuotient { p, sigma_order: p * mult_order(2, p) }
    }

    pub fn order(&self) -> u64 {
        self.p * self.sigma_order
    }

    pub fn index(&self, g: (u64, u64)) -> usize {
        (g.0 * self.sigma_order + g.1) as usize
    }

    pub fn mul(&self, g: (u64, u64), h: (u64, u64)) -> (u64, u64) {
        let t = pow_mod(2, g.1, self.p);
        ((g.0 + h.0 * t) % self.p, (g.1 + h.1) % self.sigma_order)
    }

    /// Adjoint action of `g` on `(x, y, z)`, optionally twisted by the cyclotomic character.
    pub fn act(&self, g: (u64, u64), v: [u64; 3], twisted: bool) -> [u64; 3] {
        let p = self.p;
        let t = pow_mod(2, g.1, p);
        let ti = inv_mod(t, p);
        let c = if twisted { t } else { 1 };
        [c * v[0] % p, c * t % p * v[1] % p, c * ti % p * v[2] % p]
    }

    pub const SIGMA: (u64, u64) = (0, 1);
    pub const TAU: (u64, u64) = (1, 0);

    /// Walks the Cayley graph extending `f(gs) = f(g) + g·f(s)` and reports
    /// whether the values of `f` on the generators define a cocycle.
    pub fn is_cocycle(&self, f_sigma: [u64; 3], f_tau: [u64; 3]) -> bool {
        let p = self.p;
        let mut val: Vec<Option<[u64; 3]>> = vec![None; self.order() as usize];
        val[0] = Some([0, 0, 0]);
        let mut queue = vec![(0u64, 0u64)];
        while let Some(g) = queue.pop() {
            let fg = val[self.index(g)].unwrap();
            for (s, fs) in [(Self::SIGMA, f_sigma), (Self::TAU, f_tau)] {
                let h = self.mul(g, s);
                let gfs = self.act(g, fs, false);
                let fh = [(fg[0] + gfs[0]) % p, (fg[1] + gfs[1]) % p, (fg[2] + gfs[2]) % p];
                match val[self.index(h)] {
                    Some(old) if old != fh => return false,
                    Some(_) => {}
                    None => {
                        val[self.index(h)] = Some(fh);
                        queue.push(h);
                    }
                }
            }
        }
        true
    }

    /// `dim Z¹` by propagating linear forms in the six unknowns and
    /// collecting every inconsistency as a linear constraint.
    pub fn z1_dim_symbolic(&self) -> usize {
        let p = self.p;
        type Form = [[u64; 6]; 3];
        let gen_form = |offset: usize| {
            let mut f = [[0u64; 6]; 3];
            for (i, row) in f.iter_mut().enumerate() {
                row[offset + i] = 1;
            }
            f
        };
        let gens = [(Self::SIGMA, gen_form(0)), (Self::TAU, gen_form(3))];
        let mut val: Vec<Option<Form>> = vec![None; self.order() as usize];
        val[0] = Some([[0; 6]; 3]);
        let mut queue = vec![(0u64, 0u64)];
        let mut constraints: Vec<Vec<u64>> = Vec::new();
        while let Some(g) = queue.pop() {
            let fg = val[self.index(g)].unwrap();
            for (s, fs) in gens {
                let h = self.mul(g, s);
                let mut fh = fg;
                for k in 0..6 {
                    let col = self.act(g, [fs[0][k], fs[1][k], fs[2][k]], false);
                    for i in 0..3 {
                        fh[i][k] = (fh[i][k] + col[i]) % p;
                    }
                }
                match val[self.index(h)] {
                    Some(old) => {
                        for i in 0..3 {
                            let row: Vec<u64> = (0..6).map(|k| (fh[i][k] + p - old[i][k]) % p).collect();
                            if row.iter().any(|&x| x != 0) {
                                constraints.push(row);
                            }
                        }
                    }
                    None => {
                        val[self.index(h)] = Some(fh);
                        queue.push(h);
                    }
                }
            }
        }
        6 - rank_mod(p, &constraints)
    }

    /// `dim Z¹` by testing all `p⁶` generator values.
    pub fn z1_dim_enumerated(&self) -> usize {
        let p = self.p;
        let mut count = 0u64;
        for code in 0..p.pow(6) {
            let mut c = code;
            let mut d = [0u64; 6];
            for x in &mut d {
                *x = c % p;
                c /= p;
            }
            if self.is_cocycle([d[0], d[1], d[2]], [d[3], d[4], d[5]]) {
                count += 1;
            }
        }
        let mut dim = 0;
        while p.pow(dim) < count {
            dim += 1;
        }
        assert_eq!(p.pow(dim), count, "cocycle count is not a power of p");
        dim as usize
    }

    /// `dim B¹` as the rank of `X ↦ (σX - X, τX - X)`.
    pub fn b1_dim(&self) -> usize {
        let p = self.p;
        let rows: Vec<Vec<u64>> = (0..3)
            .map(|i| {
                let mut e = [0u64; 3];
                e[i] = 1;
                let s = self.act(Self::SIGMA, e, false);
                let t = self.act(Self::TAU, e, false);
                (0..3)
                    .map(|k| (s[k] + p - e[k]) % p)
                    .chain((0..3).map(|k| (t[k] + p - e[k]) % p))
                    .collect()
            })
            .collect();
        rank_mod(p, &rows)
    }

    /// Dimension of the invariants by counting fixed vectors.
    pub fn h0_dim(&self, twisted: bool) -> usize {
        let p = self.p;
        let mut count = 0u64;
        for x in 0..p {
            for y in 0..p {
                for z in 0..p {
                    let v = [x, y, z];
                    if self.act(Self::SIGMA, v, twisted) == v && self.act(Self::TAU, v, twisted) == v {
                        count += 1;
                    }
                }
            }
        }
        (0..).find(|&d| p.pow(d) == count).unwrap() as usize
    }
}

pub fn mat_mul(p: u64, m: [u64; 4], n: [u64; 4]) -> [u64; 4] {
    [
        (m[0] * n[0] + m[1] * n[2]) % p,
        (m[0] * n[1] + m[1] * n[3]) % p,
        (m[2] * n[0] + m[3] * n[2]) % p,
        (m[2] * n[1] + m[3] * n[3]) % p,
    ]
}

/// Dimension of `{X trace-zero : c·gXg⁻¹ = X for every (g, c)}`, counted
/// exhaustively over all `p³` matrices.
pub fn invariant_dim(p: u64, gens: &[([u64; 4], u64)]) -> usize {
    let mut count = 0u64;
    for x in 0..p {
        for y in 0..p {
            for z in 0..p {
                let xm = [x, y, z, (p - x) % p];
                let fixed = gens.iter().all(|&(g, c)| {
                    let lhs = mat_mul(p, g, xm).map(|e| e * c % p);
                    lhs == mat_mul(p, xm, g)
                });
                if fixed {
                    count += 1;
                }
            }
        }
    }
    (0..).find(|&d| p.pow(d) == count).unwrap() as usize
}

/// Number of trace-zero `X` over `F_p` commuting with `A = diag(a, d)`.
pub fn diag_centralizer_count(p: u64, a: u64, d: u64) -> u64 {
    let am = [a % p, 0, 0, d % p];
    let mut count = 0;
    for x in 0..p {
        for y in 0..p {
            for z in 0..p {
                let xm = [x, y, z, (p - x) % p];
                if mat_mul(p, am, xm) == mat_mul(p, xm, am) {
                    count += 1;
                }
            }
        }
    }
    count
}
