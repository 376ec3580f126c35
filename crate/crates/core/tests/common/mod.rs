//! Shared fixtures: synthetic 64x64 scenes with a binary ground truth and a
//! soft rough mask that has gaps, breaks or holes.

#![allow(dead_code)]

use morsp::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIZE: usize = 64;

/// Rough-mask levels: confident object, missed foreground (gaps, breaks),
/// spurious foreground (filled holes), background.
pub const OBJECT: f64 = 0.8;
pub const MISSED: f64 = 0.4;
pub const SPURIOUS: f64 = 0.6;
pub const BACKGROUND: f64 = 0.08;
pub const JITTER: f64 = 0.04;

#[derive(Debug, Clone, Copy)]
pub struct Levels {
    pub object: f64,
    pub missed: f64,
    pub spurious: f64,
    pub background: f64,
}

pub const LEVELS: Levels = Levels {
    object: OBJECT,
    missed: MISSED,
    spurious: SPURIOUS,
    background: BACKGROUND,
};

pub struct Scene {
    pub name: &'static str,
    pub gt: GrayImage,
    pub rough: GrayImage,
}

fn dist_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

type Pred = Box<dyn Fn(f64, f64) -> bool>;

fn segment(a: (f64, f64), b: (f64, f64), half_width: f64) -> Pred {
    Box::new(move |r, c| dist_to_segment((r, c), a, b) <= half_width)
}

fn ring(center: (f64, f64), radius: f64, half_width: f64) -> Pred {
    Box::new(move |r, c| {
        let d = ((r - center.0).powi(2) + (c - center.1).powi(2)).sqrt();
        (d - radius).abs() <= half_width
    })
}

fn ellipse(center: (f64, f64), ry: f64, rx: f64) -> Pred {
    Box::new(move |r, c| ((r - center.0) / ry).powi(2) + ((c - center.1) / rx).powi(2) <= 1.0)
}

fn disk(center: (f64, f64), radius: f64) -> Pred {
    ellipse(center, radius, radius)
}

fn angle_window(center: (f64, f64), from_deg: f64, to_deg: f64) -> Pred {
    Box::new(move |r, c| {
        let a = (r - center.0).atan2(c - center.1).to_degrees();
        let a = if a < 0.0 { a + 360.0 } else { a };
        (from_deg..=to_deg).contains(&a)
    })
}

fn rect(r0: f64, r1: f64, c0: f64, c1: f64) -> Pred {
    Box::new(move |r, c| (r0..=r1).contains(&r) && (c0..=c1).contains(&c))
}

fn any(parts: Vec<Pred>) -> Pred {
    Box::new(move |r, c| parts.iter().any(|p| p(r, c)))
}

fn minus(a: Pred, b: Pred) -> Pred {
    Box::new(move |r, c| a(r, c) && !b(r, c))
}

enum Defect {
    /// Ground-truth foreground the rough mask misses.
    Missed(Pred),
    /// Ground-truth holes the rough mask fills in.
    Filled(Pred),
}

fn build(name: &'static str, seed: u64, object: Pred, defect: Defect, lv: Levels) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gt_pred, missed, spurious): (Pred, Pred, Pred) = match defect {
        Defect::Missed(d) => (object, d, Box::new(|_, _| false)),
        Defect::Filled(h) => {
            let hole: std::rc::Rc<dyn Fn(f64, f64) -> bool> = std::rc::Rc::from(h);
            let h2 = hole.clone();
            let obj: std::rc::Rc<dyn Fn(f64, f64) -> bool> = std::rc::Rc::from(object);
            let o2 = obj.clone();
            (
                minus(Box::new(move |r, c| obj(r, c)), Box::new(move |r, c| hole(r, c))),
                Box::new(|_, _| false),
                Box::new(move |r, c| o2(r, c) && h2(r, c)),
            )
        }
    };
    let gt = GrayImage::from_fn(SIZE, SIZE, |r, c| if gt_pred(r as f64, c as f64) { 1.0 } else { 0.0 }).unwrap();
    let rough = GrayImage::from_fn(SIZE, SIZE, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let base = if spurious(y, x) {
            lv.spurious
        } else if !gt_pred(y, x) {
            lv.background
        } else if missed(y, x) {
            lv.missed
        } else {
            lv.object
        };
        (base + rng.gen_range(-JITTER..=JITTER)).clamp(0.0, 1.0)
    })
    .unwrap();
    Scene { name, gt, rough }
}

/// Ten scenes: lines with gaps, rings with breaks, blobs with holes.
pub fn scenes() -> Vec<Scene> {
    scenes_with(LEVELS)
}

pub fn scenes_with(lv: Levels) -> Vec<Scene> {
    let mid = (31.5, 31.5);
    vec![
        build(
            "horizontal_line_gap",
            1,
            segment((32.0, 6.0), (32.0, 57.0), 1.0),
            Defect::Missed(rect(0.0, 63.0, 26.0, 33.0)),
            lv,
        ),
        build(
            "diagonal_line_gap",
            2,
            segment((8.0, 8.0), (55.0, 55.0), 1.0),
            Defect::Missed(rect(27.0, 34.0, 27.0, 34.0)),
            lv,
        ),
        build(
            "vertical_line_two_gaps",
            3,
            segment((5.0, 30.0), (58.0, 30.0), 1.0),
            Defect::Missed(any(vec![rect(17.0, 22.0, 0.0, 63.0), rect(39.0, 44.0, 0.0, 63.0)])),
            lv,
        ),
        build(
            "crossing_lines_gaps",
            4,
            any(vec![
                segment((10.0, 10.0), (10.0, 54.0), 1.0),
                segment((10.0, 32.0), (56.0, 32.0), 1.0),
            ]),
            Defect::Missed(any(vec![rect(0.0, 63.0, 17.0, 22.0), rect(33.0, 39.0, 0.0, 63.0)])),
            lv,
        ),
        build(
            "ring_one_break",
            5,
            ring(mid, 20.0, 1.0),
            Defect::Missed(angle_window(mid, 75.0, 100.0)),
            lv,
        ),
        build(
            "ring_two_breaks",
            6,
            ring(mid, 22.0, 1.5),
            Defect::Missed(any(vec![angle_window(mid, 0.0, 15.0), angle_window(mid, 165.0, 185.0)])),
            lv,
        ),
        build(
            "small_ring_break",
            7,
            ring(mid, 12.0, 1.0),
            Defect::Missed(angle_window(mid, 240.0, 280.0)),
            lv,
        ),
        build(
            "disk_with_hole",
            8,
            disk(mid, 20.0),
            Defect::Filled(disk((28.0, 35.0), 6.0)),
            lv,
        ),
        build(
            "rectangle_with_holes",
            9,
            rect(12.0, 51.0, 8.0, 55.0),
            Defect::Filled(any(vec![disk((22.0, 20.0), 5.0), disk((40.0, 42.0), 5.5)])),
            lv,
        ),
        build(
            "ellipse_with_hole",
            10,
            ellipse(mid, 16.0, 26.0),
            Defect::Filled(ellipse((31.5, 24.0), 5.0, 8.0)),
            lv,
        ),
    ]
}

pub fn write_pgm(path: &std::path::Path, img: &GrayImage) {
    std::fs::write(path, morsp::cli::imageio::encode_pgm(img)).unwrap();
}
