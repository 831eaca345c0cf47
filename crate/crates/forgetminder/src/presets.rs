//! Ready-made synthetic scenarios with calibrated pipeline settings.

use crate::geom::Rect;
use crate::gibbs::TrainConfig;
use crate::synth::{ActionClass, RegionSpec, Scenario, Slot};

/// A scenario plus every knob the end-to-end pipeline needs for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub scenario: Scenario,
    pub train_videos: usize,
    pub test_videos: usize,
    pub clip_len: usize,
    pub step: usize,
    pub dict_size: usize,
    pub train: TrainConfig,
    pub infer_iters: usize,
    pub threshold: f64,
}

fn one_hot(dim: usize, idx: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[idx] = scale;
    v
}

fn class(
    id: usize,
    name: &str,
    n_actions: usize,
    n_objects: usize,
    object_class: usize,
    duration_clips: (usize, usize),
) -> ActionClass {
    ActionClass {
        id,
        name: name.to_string(),
        human_center: one_hot(n_actions, id, 4.0),
        object_center: one_hot(n_objects, object_class, 4.0),
        noise_sd: 0.5,
        duration_clips,
        object_class,
    }
}

fn required(class_id: usize) -> Slot {
    Slot {
        class_id,
        optional: false,
        forget_prob: 0.0,
    }
}

fn rect(x: f64, y: f64, w: f64, h: f64) -> Rect {
    Rect { x, y, w, h }
}

/// Desk-work routine: ten actions over five objects performed in a fixed
/// order with constant step lengths. The shelve-book step is optional and
/// forgotten with probability 0.3.
pub fn office_synthetic() -> Preset {
    let (na, no) = (10, 5);
    let classes = vec![
        class(0, "enter", na, no, 0, (3, 3)),
        class(1, "sit-down", na, no, 1, (3, 3)),
        class(2, "power-on-monitor", na, no, 2, (3, 3)),
        class(3, "fetch-book", na, no, 3, (3, 3)),
        class(4, "type", na, no, 2, (3, 3)),
        class(5, "read", na, no, 3, (3, 3)),
        class(6, "sip-water", na, no, 4, (3, 3)),
        class(7, "shelve-book", na, no, 3, (3, 3)),
        class(8, "power-off-monitor", na, no, 2, (3, 3)),
        class(9, "leave", na, no, 0, (3, 3)),
    ];
    let mut slots: Vec<Slot> = (0..na).map(required).collect();
    slots[7] = Slot {
        class_id: 7,
        optional: true,
        forget_prob: 0.3,
    };
    let scenario = Scenario {
        name: "office".into(),
        classes,
        slots,
        order_constraints: (0..na - 1).map(|i| (i, i + 1)).collect(),
        regions: vec![
            RegionSpec {
                rect: rect(10.0, 10.0, 80.0, 160.0),
                object_class: 0,
            },
            RegionSpec {
                rect: rect(120.0, 200.0, 200.0, 80.0),
                object_class: 1,
            },
            RegionSpec {
                rect: rect(180.0, 80.0, 90.0, 70.0),
                object_class: 2,
            },
            RegionSpec {
                rect: rect(320.0, 60.0, 60.0, 40.0),
                object_class: 3,
            },
            RegionSpec {
                rect: rect(300.0, 180.0, 40.0, 40.0),
                object_class: 4,
            },
        ],
        frames_per_clip: 20,
        crossfade_frames: 10,
        well_separated: true,
    };
    let mut train = TrainConfig::new(na, no);
    train.iters = 300;
    train.burn_in = 60;
    // Scripted runs keep near-constant clip gaps; a loose gap-sd floor stops
    // the pairwise field from out-voting the word channel.
    train.sd_floor = 0.2;
    Preset {
        name: "office-synthetic",
        scenario,
        train_videos: 200,
        test_videos: 100,
        clip_len: 20,
        step: 20,
        dict_size: 120,
        train,
        infer_iters: 60,
        threshold: 0.4,
    }
}

/// Breakfast routine: eleven actions over eight objects in a fixed order.
/// Returning the milk to the fridge is the forgettable step.
pub fn kitchen_synthetic() -> Preset {
    let (na, no) = (11, 8);
    let classes = vec![
        class(0, "enter", na, no, 0, (3, 3)),
        class(1, "fetch-cup", na, no, 1, (3, 3)),
        class(2, "open-fridge", na, no, 2, (3, 3)),
        class(3, "fetch-milk", na, no, 3, (3, 3)),
        class(4, "pour-milk", na, no, 3, (3, 3)),
        class(5, "heat-food", na, no, 4, (3, 3)),
        class(6, "eat", na, no, 5, (3, 3)),
        class(7, "return-milk", na, no, 3, (3, 3)),
        class(8, "wash-cup", na, no, 6, (3, 3)),
        class(9, "lights-off", na, no, 7, (3, 3)),
        class(10, "leave", na, no, 0, (3, 3)),
    ];
    let mut slots: Vec<Slot> = (0..na).map(required).collect();
    slots[7] = Slot {
        class_id: 7,
        optional: true,
        forget_prob: 0.3,
    };
    let scenario = Scenario {
        name: "kitchen".into(),
        classes,
        slots,
        order_constraints: (0..na - 1).map(|i| (i, i + 1)).collect(),
        regions: vec![
            RegionSpec {
                rect: rect(5.0, 5.0, 70.0, 150.0),
                object_class: 0,
            },
            RegionSpec {
                rect: rect(300.0, 180.0, 40.0, 40.0),
                object_class: 1,
            },
            RegionSpec {
                rect: rect(90.0, 30.0, 90.0, 180.0),
                object_class: 2,
            },
            RegionSpec {
                rect: rect(110.0, 60.0, 30.0, 50.0),
                object_class: 3,
            },
            RegionSpec {
                rect: rect(230.0, 40.0, 80.0, 60.0),
                object_class: 4,
            },
            RegionSpec {
                rect: rect(260.0, 170.0, 50.0, 40.0),
                object_class: 5,
            },
            RegionSpec {
                rect: rect(330.0, 120.0, 70.0, 60.0),
                object_class: 6,
            },
            RegionSpec {
                rect: rect(20.0, 80.0, 20.0, 30.0),
                object_class: 7,
            },
        ],
        frames_per_clip: 20,
        crossfade_frames: 10,
        well_separated: true,
    };
    let mut train = TrainConfig::new(na, no);
    train.iters = 250;
    train.burn_in = 50;
    train.sd_floor = 0.2;
    Preset {
        name: "kitchen-synthetic",
        scenario,
        train_videos: 60,
        test_videos: 30,
        clip_len: 20,
        step: 20,
        dict_size: 100,
        train,
        infer_iters: 60,
        threshold: 0.4,
    }
}

pub fn all() -> Vec<Preset> {
    vec![office_synthetic(), kitchen_synthetic()]
}

pub fn by_name(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}
