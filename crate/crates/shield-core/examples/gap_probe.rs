use shield_core::image::linf_distance;
use shield_core::diffjpeg::diff_jpeg_forward;
use shield_core::jpeg::jpeg_round_trip;
use shield_core::{Image, seeds};
use rand::Rng;

fn main() {
    let mut overall: f64 = 0.0;
    for q in [20u8, 40, 60, 80] {
        let mut worst: f64 = 0.0;
        for seed in 0..40 {
            let mut rng = seeds::rng(100 + seed, &[0xD1FF]);
            let img = Image::from_fn(32, 32, |_, _| 0.1 + 0.8 * rng.random::<f64>()).unwrap();
            let soft = diff_jpeg_forward(&img, q).unwrap();
            let hard = jpeg_round_trip(&img, q).unwrap();
            worst = worst.max(linf_distance(&soft, &hard).unwrap());
        }
        println!("q={q}: max gap {worst:.4}");
        overall = overall.max(worst);
    }
    println!("overall {overall:.4}");
}
