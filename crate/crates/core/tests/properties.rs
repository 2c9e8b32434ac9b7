use lungrad_core::learn::{stratified_kfold, welch_t_test};
use lungrad_core::maskio::{encode_nrrd, parse_nrrd, NrrdData, NrrdEncoding, NrrdImage};
use lungrad_core::segeval::dice;
use lungrad_core::segpost::{binarize, connected_components, ensemble_average, Connectivity};
use lungrad_core::volgrid::discretize;
use lungrad_core::{LabelMask, ProbabilityMap, Volume3D, VoxelGeometry};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = [usize; 3]> {
    (1usize..6, 1usize..6, 1usize..5).prop_map(|(a, b, c)| [a, b, c])
}

fn mask_pair() -> impl Strategy<Value = (LabelMask, LabelMask)> {
    dims().prop_flat_map(|d| {
        let n = d.iter().product::<usize>();
        (prop::collection::vec(0u8..2, n), prop::collection::vec(0u8..2, n)).prop_map(move |(a, b)| {
            (
                LabelMask::new(d, VoxelGeometry::default(), a).unwrap(),
                LabelMask::new(d, VoxelGeometry::default(), b).unwrap(),
            )
        })
    })
}

fn geometry() -> impl Strategy<Value = VoxelGeometry> {
    (prop::array::uniform3(0.1f64..5.0), prop::array::uniform3(-500.0f64..500.0), 0.0f64..6.3).prop_map(|(s, o, th)| {
        let (c, si) = (th.cos(), th.sin());
        VoxelGeometry::new(s, o, [[c, si, 0.0], [-si, c, 0.0], [0.0, 0.0, 1.0]]).unwrap()
    })
}

proptest! {
    #[test]
    fn dice_is_symmetric_and_bounded((a, b) in mask_pair()) {
        let ab = dice(&a, &b).unwrap();
        prop_assert_eq!(ab, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn components_partition_the_foreground((a, _) in mask_pair()) {
        let six = connected_components(&a, Connectivity::Six);
        let full = connected_components(&a, Connectivity::TwentySix);
        prop_assert!(six.len() >= full.len());
        for cs in [&six, &full] {
            prop_assert_eq!(cs.components.iter().map(|c| c.voxel_count).sum::<usize>(), a.count());
            prop_assert!(cs.components.windows(2).all(|w| w[0].voxel_count >= w[1].voxel_count));
        }
    }

    #[test]
    fn ensemble_of_identical_maps_is_identity(d in dims(), seed in any::<u64>()) {
        let n: usize = d.iter().product();
        let probs: Vec<f32> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f32 / 999.0).collect();
        let p = ProbabilityMap::new(d, VoxelGeometry::default(), probs).unwrap();
        let avg = ensemble_average(&[p.clone(), p.clone(), p.clone()]).unwrap();
        prop_assert_eq!(binarize(&avg, 0.5).unwrap(), binarize(&p, 0.5).unwrap());
    }

    #[test]
    fn nrrd_roundtrip_is_exact(d in dims(), g in geometry(), kind in 0u8..3, gz in any::<bool>(), seed in any::<u32>()) {
        let n: usize = d.iter().product();
        let mix = |i: usize| (i as u32).wrapping_mul(2_654_435_761).wrapping_add(seed);
        let data = match kind {
            0 => NrrdData::U8((0..n).map(|i| mix(i) as u8).collect()),
            1 => NrrdData::I16((0..n).map(|i| mix(i) as i16).collect()),
            _ => NrrdData::F32((0..n).map(|i| f32::from_bits(mix(i) & 0x3fff_ffff)).collect()),
        };
        let img = NrrdImage { dims: d, geometry: g, data };
        let enc = if gz { NrrdEncoding::Gzip } else { NrrdEncoding::Raw };
        let back = parse_nrrd(&encode_nrrd(&img, enc).unwrap()).unwrap();
        prop_assert_eq!(back.dims, img.dims);
        prop_assert_eq!(back.data, img.data);
        prop_assert!(back.geometry.approx_eq(&img.geometry));
    }

    #[test]
    fn discretization_ignores_intensity_offset(d in dims(), base in prop::collection::vec(-1000i32..1000, 1..150), c in -300i32..300) {
        let n: usize = d.iter().product();
        let vals: Vec<f32> = (0..n).map(|i| base[i % base.len()] as f32).collect();
        let shifted: Vec<f32> = vals.iter().map(|v| v + c as f32).collect();
        let mask = LabelMask::new(d, VoxelGeometry::default(), (0..n).map(|i| u8::from(i % 3 != 1)).collect()).unwrap();
        let a = discretize(&Volume3D::new(d, VoxelGeometry::default(), vals).unwrap(), &mask, 25.0).unwrap();
        let b = discretize(&Volume3D::new(d, VoxelGeometry::default(), shifted).unwrap(), &mask, 25.0).unwrap();
        prop_assert_eq!(a.bins, b.bins);
        prop_assert_eq!(a.num_levels, b.num_levels);
    }

    #[test]
    fn stratified_folds_partition_and_balance(y in prop::collection::vec(0u8..2, 10..80), k in 2usize..6, seed in any::<u64>()) {
        let n1 = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(n1 >= k && y.len() - n1 >= k);
        let folds = stratified_kfold(&y, k, seed).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        for c in 0..2u8 {
            let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| y[i] == c).count()).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn welch_p_is_a_probability(a in prop::collection::vec(-10.0f64..10.0, 2..20), b in prop::collection::vec(-10.0f64..10.0, 2..20)) {
        let r = welch_t_test(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p));
        let swapped = welch_t_test(&b, &a).unwrap();
        prop_assert!((r.p - swapped.p).abs() < 1e-12);
    }
}
