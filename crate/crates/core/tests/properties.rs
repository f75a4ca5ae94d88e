use nalgebra::{DMatrix, DVector};
use odest::data::{
    load_barrier_counts, load_journeys, load_stations, write_barrier_counts, write_journeys, write_stations, Endpoint,
    JourneyRecord, Station, TicketClass,
};
use odest::estim::{estimate, estimate_lambda_gaussian, project_constraints, LikelihoodFamily, Method};
use odest::sim::{draw_day, rng_from_seed, Family};
use odest::spectral::{reconstruct, spectral_decompose};
use odest::{ObservationSet, OdMatrix};
use proptest::prelude::*;

fn symmetric(n: usize, values: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = values[k];
            m[(j, i)] = values[k];
            k += 1;
        }
    }
    m
}

fn matrix_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (3usize..=7).prop_flat_map(|n| {
        proptest::collection::vec(1.0f64..120.0, n * (n - 1) / 2).prop_map(move |v| symmetric(n, &v))
    })
}

fn permute(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], perm[j])])
}

fn observations(truth: &OdMatrix, days: usize, seed: u64) -> ObservationSet {
    let mut rng = rng_from_seed(seed);
    let mats: Vec<OdMatrix> = (0..days)
        .map(|_| OdMatrix::new(truth.station_ids().to_vec(), draw_day(truth.entries(), Family::Poisson, &mut rng)).unwrap())
        .collect();
    ObservationSet::from_days(&mats).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_round_trip_and_zero_trace(m in matrix_strategy()) {
        let r = OdMatrix::from_matrix(m.clone()).unwrap();
        let basis = spectral_decompose(&r).unwrap();
        let back = reconstruct(basis.vectors(), basis.values()).unwrap();
        prop_assert!((&back - &m).norm() <= 1e-8 * m.norm());
        prop_assert!(basis.values().sum().abs() <= 1e-8 * m.amax());
        let p = basis.vectors();
        prop_assert!((p.transpose() * p - DMatrix::identity(m.nrows(), m.nrows())).amax() < 1e-10);
    }

    #[test]
    fn gaussian_is_exact_on_noiseless_margins(m in matrix_strategy()) {
        let r = OdMatrix::from_matrix(m).unwrap();
        let basis = spectral_decompose(&r).unwrap();
        let (dep, _) = r.margins();
        let rep = estimate_lambda_gaussian(&basis, &dep).unwrap();
        prop_assert!((&rep.lambda_hat - basis.values()).amax() <= 1e-9 * basis.values().amax());
    }

    #[test]
    fn daily_margins_conserve_trips(m in matrix_strategy(), seed in 0u64..1000) {
        let truth = OdMatrix::from_matrix(m).unwrap();
        let obs = observations(&truth, 4, seed);
        for t in 0..4 {
            prop_assert_eq!(obs.departures().row(t).sum(), obs.arrivals().row(t).sum());
        }
    }

    #[test]
    fn adhoc_is_permutation_equivariant(m in matrix_strategy(), seed in 0u64..1000, shift in 1usize..6) {
        let n = m.nrows();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let survey = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (m[(i, j)] / 6.0).round() + 1.0 });
        let survey = OdMatrix::from_matrix(survey).unwrap();
        let truth = OdMatrix::from_matrix(m.clone()).unwrap();
        let obs = observations(&truth, 5, seed);

        let base = estimate(Method::Adhoc, &spectral_decompose(&survey).unwrap(), &obs, LikelihoodFamily::Poisson).unwrap();

        let p_survey = OdMatrix::from_matrix(permute(survey.entries(), &perm)).unwrap();
        let dep = DMatrix::from_fn(5, n, |t, i| obs.departures()[(t, perm[i])]);
        let arr = DMatrix::from_fn(5, n, |t, i| obs.arrivals()[(t, perm[i])]);
        let p_obs = ObservationSet::new(
            p_survey.station_ids().to_vec(),
            (1..=5).map(|d| format!("day{d}")).collect(),
            dep,
            arr,
        )
        .unwrap();
        let moved = estimate(Method::Adhoc, &spectral_decompose(&p_survey).unwrap(), &p_obs, LikelihoodFamily::Poisson).unwrap();
        let expect = permute(base.rz_hat.entries(), &perm);
        prop_assert!((moved.rz_hat.entries() - &expect).amax() <= 1e-7 * expect.amax().max(1.0));
    }

    #[test]
    fn projection_is_idempotent(v in proptest::collection::vec(-50.0f64..50.0, 25)) {
        let m = DMatrix::from_fn(5, 5, |i, j| v[5 * i.min(j) + i.max(j)]);
        let once = project_constraints(&m).unwrap();
        let twice = project_constraints(once.matrix.entries()).unwrap();
        prop_assert_eq!(once.matrix.entries(), twice.matrix.entries());
        prop_assert_eq!(twice.violation, 0.0);
        prop_assert!(once.matrix.entries().iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn every_method_emits_feasible_matrices(m in matrix_strategy(), seed in 0u64..1000) {
        let truth = OdMatrix::from_matrix(m.clone()).unwrap();
        let survey = OdMatrix::from_matrix(m.map(|v| v / 6.0)).unwrap();
        let basis = spectral_decompose(&survey).unwrap();
        let obs = observations(&truth, 8, seed);
        for method in [Method::Gaussian, Method::PoissonProp1, Method::PoissonAppendix, Method::MleConstrained, Method::Adhoc] {
            for family in [LikelihoodFamily::Poisson, LikelihoodFamily::NegBin] {
                let rep = estimate(method, &basis, &obs, family).unwrap();
                let r = rep.rz_hat.entries();
                prop_assert!(r.iter().all(|x| *x >= 0.0));
                prop_assert!(r.diagonal().iter().all(|x| *x == 0.0));
                prop_assert_eq!(r, &r.transpose());
                if let Some(p) = rep.p_rz_hat {
                    prop_assert!((0.0..=1.0).contains(&p));
                }
            }
        }
    }
}

#[test]
fn csv_schemas_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let stations = vec![
        Station { id: "A".into(), name: "Alpha Wharf".into(), lat: -33.86, lon: 151.21, has_barrier: true },
        Station { id: "B".into(), name: "Beta, \"Bay\"".into(), lat: -33.87, lon: 151.26, has_barrier: false },
    ];
    let sp = dir.path().join("stations.csv");
    write_stations(std::fs::File::create(&sp).unwrap(), &stations).unwrap();
    assert_eq!(load_stations(&sp).unwrap(), stations);

    let date = chrono::NaiveDate::from_ymd_opt(2012, 3, 4).unwrap();
    let journeys = vec![JourneyRecord {
        record_id: "r1".into(),
        date,
        ticket_class: TicketClass::RegularSpecific,
        origin: Endpoint::Point { lat: -33.861, lon: 151.211 },
        destination: Endpoint::Station("B".into()),
    }];
    let jp = dir.path().join("journeys.csv");
    write_journeys(std::fs::File::create(&jp).unwrap(), &journeys).unwrap();
    assert_eq!(load_journeys(&jp).unwrap(), journeys);

    let obs = ObservationSet::new(
        vec!["A".into(), "B".into()],
        vec!["2012-03-04".into(), "2012-03-05".into()],
        DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 5.0, 6.0]),
        DMatrix::from_row_slice(2, 2, &[4.0, 3.0, 6.0, 5.0]),
    )
    .unwrap();
    let bp = dir.path().join("barriers.csv");
    write_barrier_counts(std::fs::File::create(&bp).unwrap(), &obs).unwrap();
    let back = load_barrier_counts(&bp, None).unwrap();
    assert_eq!(back.observations.departures(), obs.departures());
    assert_eq!(back.observations.arrivals(), obs.arrivals());
    assert_eq!(back.dates, vec![date, date.succ_opt().unwrap()]);
    let mean: DVector<f64> = back.observations.mean_departures();
    assert_eq!(mean.as_slice(), &[4.0, 5.0]);
}
