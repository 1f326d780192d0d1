//! Built-in scenes modelled on a climate-chamber test track: one static
//! target layout and two dynamic traffic layouts.

use super::dataset::WeatherProfile;
use super::scene::{Motion, SceneObject, SceneSpec, SensorGeometry, Shape};

/// Sensor mounting height above the floor.
pub const SENSOR_HEIGHT: f64 = 1.5;

fn floor() -> SceneObject {
    SceneObject::new("floor", Shape::Ground { height: -SENSOR_HEIGHT }, 0.2)
}

fn side_walls() -> [SceneObject; 2] {
    let wall = |name: &str, y: f64| {
        SceneObject::new(
            name,
            Shape::Box { center: [30.0, y, 1.0], half_extents: [30.0, 0.2, 2.5] },
            0.3,
        )
    };
    [wall("wall_left", 6.0), wall("wall_right", -6.0)]
}

fn car(x: f64, y: f64) -> SceneObject {
    SceneObject::new(
        "car",
        Shape::Box { center: [x + 2.2, y, -0.8], half_extents: [2.2, 0.9, 0.7] },
        0.5,
    )
}

fn tail_light(name: &str, x: f64, y: f64) -> SceneObject {
    SceneObject::new(name, Shape::Box { center: [x - 0.05, y, -0.6], half_extents: [0.05, 0.15, 0.08] }, 0.9).retro()
}

fn pedestrian(name: &str, x: f64, y: f64, reflectivity: f64) -> SceneObject {
    SceneObject::new(
        name,
        Shape::Cylinder { center: [x, y], radius: 0.25, z_min: -SENSOR_HEIGHT, z_max: 0.3 },
        reflectivity,
    )
}

/// Static layout: diffuse plates at 5 %, 50 % and 90 % reflectivity, a
/// retro-reflective post, a pedestrian and a parked car with tail lights.
pub fn setup_a() -> SceneSpec {
    let plate = |name: &str, y: f64, refl: f64| {
        SceneObject::new(name, Shape::Plate { center: [12.0, y, -0.5], half_width: 0.4, half_height: 0.5 }, refl)
    };
    let [wl, wr] = side_walls();
    SceneSpec {
        scenario_id: "setup_a".into(),
        objects: vec![
            floor(),
            wl,
            wr,
            plate("plate_05", -1.0, 0.05),
            plate("plate_50", 0.0, 0.5),
            plate("plate_90", 1.0, 0.9),
            SceneObject::new(
                "reflector_post",
                Shape::Cylinder { center: [9.0, -1.3], radius: 0.06, z_min: -SENSOR_HEIGHT, z_max: -0.5 },
                0.8,
            )
            .retro(),
            pedestrian("pedestrian", 18.0, 0.9, 0.1),
            car(19.0, -0.3),
            tail_light("tail_light_left", 19.0, 0.3),
            tail_light("tail_light_right", 19.0, -0.9),
        ],
        geometry: SensorGeometry::default(),
    }
}

/// Dynamic layout: a car leaving the ego lane, a crossing pedestrian, a
/// cyclist at the roadside and a man in a reflective vest.
pub fn setup_b() -> SceneSpec {
    let leaving = Motion::Linear { velocity: [1.5, 0.0, 0.0], period: 8.0 };
    let [wl, wr] = side_walls();
    SceneSpec {
        scenario_id: "setup_b".into(),
        objects: vec![
            floor(),
            wl,
            wr,
            car(8.0, 0.0).moving(leaving.clone()),
            tail_light("tail_light_left", 8.0, 0.6).moving(leaving.clone()),
            tail_light("tail_light_right", 8.0, -0.6).moving(leaving),
            pedestrian("pedestrian", 11.0, 0.0, 0.15).moving(Motion::Oscillate {
                direction: [0.0, 1.0, 0.0],
                amplitude: 2.5,
                period: 9.0,
            }),
            SceneObject::new(
                "cyclist",
                Shape::Box { center: [14.0, 2.2, -0.7], half_extents: [0.8, 0.3, 0.8] },
                0.3,
            )
            .moving(Motion::Oscillate { direction: [1.0, 0.0, 0.0], amplitude: 3.0, period: 12.0 }),
            pedestrian("vest_man", 16.0, -2.0, 0.6).retro(),
            pedestrian("child", 6.0, 2.0, 0.2),
        ],
        geometry: SensorGeometry::default(),
    }
}

/// Dynamic layout: diffuse targets leaving the field of view sideways.
pub fn setup_c() -> SceneSpec {
    let leaving = |vy: f64| Motion::Linear { velocity: [0.0, vy, 0.0], period: 10.0 };
    let [wl, wr] = side_walls();
    SceneSpec {
        scenario_id: "setup_c".into(),
        objects: vec![
            floor(),
            wl,
            wr,
            SceneObject::new(
                "target_near",
                Shape::Plate { center: [7.0, 0.0, -0.5], half_width: 0.5, half_height: 0.8 },
                0.5,
            )
            .moving(leaving(0.6)),
            SceneObject::new(
                "target_mid",
                Shape::Plate { center: [11.0, 0.5, -0.5], half_width: 0.5, half_height: 0.8 },
                0.9,
            )
            .moving(leaving(-0.8)),
            SceneObject::new(
                "target_far",
                Shape::Box { center: [17.0, -0.5, -0.6], half_extents: [0.3, 0.6, 0.9] },
                0.1,
            )
            .moving(leaving(0.5)),
            car(22.0, 0.0),
        ],
        geometry: SensorGeometry::default(),
    }
}

pub fn chamber_setups() -> Vec<SceneSpec> {
    vec![setup_a(), setup_b(), setup_c()]
}

/// Clear reference, 55 mm/h rain and fog with visibility between 20 and 60 m.
pub fn chamber_profiles() -> Vec<WeatherProfile> {
    vec![WeatherProfile::clear(), WeatherProfile::rain(55.0), WeatherProfile::fog(20.0, 60.0)]
}
