use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toeplitz_lab::group::{QuotientChain, Word};
use toeplitz_lab::perm::Perm;
use toeplitz_lab::shift::{dists, is_pseudoorbit, pseudoorbit_disagreements, FiniteMap, FiniteSubshift, Mode};
use toeplitz_lab::sofic::{check_iso, coset_sofic, kernel_quotient, orbit_decompose, SoficLevel};

fn int(n: i64) -> Word {
    Word::power(0, n)
}

fn f_set() -> Vec<Word> {
    vec![int(-1), int(0), int(1)]
}

fn random_perm(rng: &mut ChaCha8Rng, n: usize) -> Perm {
    let mut images: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        images.swap(i, rng.gen_range(0..=i));
    }
    Perm::from_images(images).unwrap()
}

/// Orbit map of a periodic point of period `m` on the coset level `ℤ/n`.
fn orbit_map(m: usize, n: usize, seed: &[u8]) -> (SoficLevel, FiniteMap) {
    let q = QuotientChain::cyclic(&[m]).unwrap();
    let sub = FiniteSubshift::from_seeds(q.group.clone(), q.levels[0].clone(), 2, &[seed.to_vec()]).unwrap();
    let ch = QuotientChain::cyclic(&[n]).unwrap();
    let level = coset_sofic(&ch).levels.remove(0);
    let reps: Vec<Word> = (0..n as i64).map(int).collect();
    let x = sub.configs.iter().position(|c| c == seed).unwrap();
    (level, sub.orbit_map(x, &ch.levels[0], &reps, &f_set()))
}

fn perturb(map: &FiniteMap, rng: &mut ChaCha8Rng, points: usize) -> FiniteMap {
    let FiniteMap::Configs { window, values } = map else { unreachable!() };
    let mut values = values.clone();
    for _ in 0..points {
        let v = rng.gen_range(0..values.len());
        let j = rng.gen_range(0..window.len());
        values[v][j] ^= 1;
    }
    FiniteMap::Configs { window: window.clone(), values }
}

#[test]
fn composition_transport_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let f = f_set();
    for _ in 0..200 {
        let m = rng.gen_range(1..=4usize);
        let n = m * rng.gen_range(1..=6usize);
        let seed: Vec<u8> = (0..m).map(|_| rng.gen_range(0..2)).collect();
        let (sigma_v, clean) = orbit_map(m, n, &seed);
        let noise = rng.gen_range(0..=2);
        let phi = perturb(&clean, &mut rng, noise);

        // σ_U = π⁻¹σ_Vπ, so ψ = π is an exact isomorphism before noise.
        let pi = random_perm(&mut rng, n);
        let pinv = pi.inverse();
        let gens = sigma_v.generators().unwrap().iter().map(|g| pinv.compose(&g.compose(&pi))).collect();
        let sigma_u = SoficLevel::homomorphic(sigma_v.group.clone(), gens).unwrap();
        let mut psi: Vec<usize> = (0..n).map(|u| pi.apply(u)).collect();
        for _ in 0..rng.gen_range(0..=1) {
            let u = rng.gen_range(0..n);
            psi[u] = rng.gen_range(0..n);
        }

        let iso = check_iso(&psi, &sigma_u, &sigma_v, &f, 1.0).unwrap();
        let po = is_pseudoorbit(&phi, &f, 1.0, &sigma_v).unwrap();
        let delta0 = iso
            .defects
            .iter()
            .chain(&po.defects)
            .copied()
            .fold(1.0 - iso.ratio(n), f64::max);
        let composed = phi.compose(&psi);
        let after = is_pseudoorbit(&composed, &f, 1.0, &sigma_u).unwrap();
        for d in after.defects {
            assert!(d <= (8.0 * delta0).sqrt() + 1e-12, "defect {d} above sqrt(8 * {delta0})");
        }
    }
}

/// `d∞(φ₁∘ψ, φ₂∘ψ) = 1` whenever `d₂(φ₁, φ₂) ≥ ε`, provided ψ is injective on
/// more than a `1 − δ` fraction with `δ < ε²`.
#[test]
fn separation_transport_with_square_hypothesis() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..300 {
        let n = rng.gen_range(4..=40usize);
        let window = vec![int(0)];
        let a: Vec<Vec<u8>> = (0..n).map(|_| vec![rng.gen_range(0..2)]).collect();
        let mut b = a.clone();
        let flips = rng.gen_range(1..=n);
        for x in b.iter_mut().take(flips) {
            x[0] ^= 1;
        }
        let (p1, p2) = (
            FiniteMap::Configs { window: window.clone(), values: a },
            FiniteMap::Configs { window: window.clone(), values: b },
        );
        let eps = dists(&p1, &p2, Mode::D2).unwrap();
        let delta = eps * eps * rng.gen_range(0.0..0.999);
        // ψ avoids as many points as the bound allows.
        let missed = ((delta * n as f64).ceil() as usize).saturating_sub(1).min(n - 1);
        let psi: Vec<usize> = (0..n).map(|u| if u < missed { missed } else { u }).collect();
        let level = coset_sofic(&QuotientChain::cyclic(&[n]).unwrap()).levels.remove(0);
        let iso = check_iso(&psi, &level, &level, &[], delta.max(f64::MIN_POSITIVE)).unwrap();
        assert!(iso.ratio(n) > 1.0 - delta || missed == 0);
        let d = dists(&p1.compose(&psi), &p2.compose(&psi), Mode::Dinf).unwrap();
        assert!(d >= eps.sqrt().min(1.0), "eps {eps}, delta {delta}, missed {missed}");
    }
}

/// With only `δ < ε/2`, ψ can miss the single point where the maps differ.
#[test]
fn separation_transport_literal_hypothesis_counterexample() {
    let n = 100;
    let window = vec![int(0)];
    let a: Vec<Vec<u8>> = vec![vec![0]; n];
    let mut b = a.clone();
    b[0][0] = 1;
    let (p1, p2) = (
        FiniteMap::Configs { window: window.clone(), values: a },
        FiniteMap::Configs { window, values: b },
    );
    let eps = dists(&p1, &p2, Mode::D2).unwrap();
    assert!((eps - 0.1).abs() < 1e-15);
    let delta = 0.04;
    assert!(delta < eps / 2.0 && delta >= eps * eps);
    let psi: Vec<usize> = (0..n).map(|u| u.max(1)).collect();
    let level = coset_sofic(&QuotientChain::cyclic(&[n]).unwrap()).levels.remove(0);
    let iso = check_iso(&psi, &level, &level, &[], delta).unwrap();
    assert!(iso.ratio(n) > 1.0 - delta);
    assert_eq!(dists(&p1.compose(&psi), &p2.compose(&psi), Mode::Dinf).unwrap(), 0.0);
}

/// Pulling a map back along `⨿G/K → ⨿G/Stab(v_i)` keeps each orbit's
/// disagreement fraction; the global fractions differ when orbit sizes do.
#[test]
fn psi_transport_per_orbit() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let f = f_set();
    let mut saw_global_difference = false;
    for _ in 0..40 {
        let sizes: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=5)).collect();
        let n: usize = sizes.iter().sum();
        // ℤ acting by a rotation on each block.
        let mut images = Vec::with_capacity(n);
        let mut base = 0;
        for &s in &sizes {
            images.extend((0..s).map(|i| (base + (i + 1) % s) as u32));
            base += s;
        }
        let group = QuotientChain::cyclic(&[2]).unwrap().group;
        let level = SoficLevel::homomorphic(group, vec![Perm::from_images(images).unwrap()]).unwrap();
        let dec = orbit_decompose(&level).unwrap();
        let (big, proj) = kernel_quotient(&level, &dec, 1 << 12).unwrap();
        let values: Vec<Vec<u8>> = (0..n).map(|_| (0..f.len()).map(|_| rng.gen_range(0..2)).collect()).collect();
        let phi = FiniteMap::Configs { window: f.clone(), values };
        let pulled = phi.compose(&proj);
        let bad_v = pseudoorbit_disagreements(&phi, &f, &level).unwrap();
        let bad_k = pseudoorbit_disagreements(&pulled, &f, &big).unwrap();
        let m = big.size / dec.copies();
        for s in 0..f.len() {
            for (i, orbit) in dec.orbits.iter().enumerate() {
                let on_v = orbit.iter().filter(|&&v| bad_v[s][v]).count();
                let on_k = (i * m..(i + 1) * m).filter(|&x| bad_k[s][x]).count();
                assert_eq!(on_v * m, on_k * orbit.len(), "orbit {i}, s {s}");
            }
            let gv = bad_v[s].iter().filter(|&&b| b).count();
            let gk = bad_k[s].iter().filter(|&&b| b).count();
            if gv * big.size != gk * n {
                saw_global_difference = true;
            }
        }
    }
    assert!(saw_global_difference);
}
