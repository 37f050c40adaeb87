//! Augmentation properties over random images and streams.

use proptest::prelude::*;
use saa_core::augment::{
    cutout_at, diverse_augment, hflip, patchwise_diverse_augment_traced, strong_augment, translate_reflect,
    weak_augment, AugPolicy, Image, Orientation, CUTOUT_FILL,
};
use saa_core::rng::{stream, Purpose};

fn image(max_half: usize) -> impl Strategy<Value = Image> {
    (1usize..=3, 1..=max_half, 1..=max_half).prop_flat_map(|(c, hh, hw)| {
        let (h, w) = (2 * hh, 2 * hw);
        prop::collection::vec(0.0f32..=255.0, c * h * w).prop_map(move |d| Image::new(c, h, w, d).unwrap())
    })
}

/// Reflection by walking: bounce off each edge until inside.
fn bounce(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn views_keep_shape_and_range(img in image(8), seed in any::<u64>()) {
        let policy = AugPolicy::default();
        let mut rng = stream(seed, Purpose::UnlabeledAug, 0, 0);
        let views = [
            weak_augment(&img, &mut rng),
            strong_augment(&img, &policy, &mut rng),
            diverse_augment(&img, &policy, &mut rng).unwrap(),
            patchwise_diverse_augment_traced(&img, &policy, &mut rng).unwrap().0,
        ];
        for v in &views {
            prop_assert_eq!(v.shape(), img.shape());
            prop_assert!(v.data().iter().all(|&p| (0.0..=255.0).contains(&p)));
        }
    }

    #[test]
    fn same_stream_same_view(img in image(8), seed in any::<u64>()) {
        let policy = AugPolicy::default();
        let run = || diverse_augment(&img, &policy, &mut stream(seed, Purpose::UnlabeledAug, 1, 2)).unwrap();
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn identity_policy_without_cutout_is_identity(img in image(8), seed in any::<u64>()) {
        let out = strong_augment(&img, &AugPolicy::identity_only(), &mut stream(seed, Purpose::UnlabeledAug, 0, 0));
        prop_assert_eq!(out, img);
    }

    #[test]
    fn translation_matches_bounce_reference(img in image(8), dx in -20isize..20, dy in -20isize..20) {
        let out = translate_reflect(&img, dx, dy);
        let (c, h, w) = img.shape();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let src = img.get(ch, bounce(y as isize - dy, h), bounce(x as isize - dx, w));
                    prop_assert_eq!(out.get(ch, y, x), src);
                }
            }
        }
    }

    #[test]
    fn flip_mirrors_columns(img in image(8)) {
        let out = hflip(&img);
        let (c, h, w) = img.shape();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    prop_assert_eq!(out.get(ch, y, x), img.get(ch, y, w - 1 - x));
                }
            }
        }
    }

    #[test]
    fn cutout_touches_one_square(img in image(8), cy in 0usize..16, cx in 0usize..16, side in 0usize..10) {
        let (c, h, w) = img.shape();
        let (cy, cx) = (cy % h, cx % w);
        let out = cutout_at(&img, cy, cx, side);
        let half = (side / 2) as isize;
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let dy = y as isize - (cy as isize - half);
                    let dx = x as isize - (cx as isize - half);
                    let inside = (0..side as isize).contains(&dy) && (0..side as isize).contains(&dx);
                    let expect = if inside { CUTOUT_FILL } else { img.get(ch, y, x) };
                    prop_assert_eq!(out.get(ch, y, x), expect);
                }
            }
        }
    }

    #[test]
    fn patchwise_halves_only_see_their_own_half(img in image(8), seed in any::<u64>(), fill in 0.0f32..255.0) {
        let policy = AugPolicy::default();
        let (out, o) = patchwise_diverse_augment_traced(&img, &policy, &mut stream(seed, Purpose::UnlabeledAug, 0, 1)).unwrap();
        let (c, h, w) = img.shape();
        // Overwrite the second half of the input; the first half of the output must not move.
        let mut other = img.clone();
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let second = match o {
                        Orientation::TopBottom => y >= h / 2,
                        Orientation::LeftRight => x >= w / 2,
                    };
                    if second {
                        other.set(ch, y, x, fill);
                    }
                }
            }
        }
        let (out2, o2) = patchwise_diverse_augment_traced(&other, &policy, &mut stream(seed, Purpose::UnlabeledAug, 0, 1)).unwrap();
        prop_assert_eq!(o, o2);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let first = match o {
                        Orientation::TopBottom => y < h / 2,
                        Orientation::LeftRight => x < w / 2,
                    };
                    if first {
                        prop_assert_eq!(out.get(ch, y, x), out2.get(ch, y, x));
                    }
                }
            }
        }
    }
}
