//! Bundled synthetic scenes: straight road, curve, lead-vehicle brake,
//! lateral squeeze, off-route bait and dead end, two variants each.

use crate::error::Result;
use crate::geometry::{Polygon, Vec2};
use crate::pseudo_expert::build_candidate;
use crate::scene::{ego_footprint, Centerline, EgoState, ObstacleTrack, Pose2D, Scene, Trajectory, VehicleDims};

const T: usize = 8;
const DT: f64 = 0.5;
const HALF_ROAD: f64 = 5.25;
/// Station of the ego on every demo centerline.
const EGO_STATION: f64 = 10.0;

fn straight_centerline() -> Result<Centerline> {
    Centerline::from_points(&[[-10.0, 0.0], [120.0, 0.0]])
}

/// Straight for 30 m, then a left arc of the given radius.
fn curved_centerline(radius: f64) -> Result<Centerline> {
    let mut pts = vec![[-10.0, 0.0], [20.0, 0.0]];
    let sweep = 96.0 / radius;
    let steps = (sweep / 0.05).ceil() as usize;
    for k in 1..=steps {
        let a = sweep * k as f64 / steps as f64;
        pts.push([20.0 + radius * a.sin(), radius * (1.0 - a.cos())]);
    }
    Centerline::from_points(&pts)
}

/// Road polygon following the centerline at ±`HALF_ROAD`.
fn road_polygon(cl: &Centerline) -> Result<Polygon> {
    let n = cl.length().ceil() as usize;
    let stations: Vec<f64> = (0..=n).map(|i| (i as f64).min(cl.length())).collect();
    let mut ring: Vec<Vec2> = stations.iter().map(|&s| cl.to_cartesian(s, -HALF_ROAD).position()).collect();
    ring.extend(stations.iter().rev().map(|&s| cl.to_cartesian(s, HALF_ROAD).position()));
    ring.dedup();
    Polygon::new(ring)
}

fn vehicle_box(x: f64, y: f64) -> Result<Polygon> {
    Ok(ego_footprint(&Pose2D::new(x, y, 0.0), &VehicleDims::default()))
}

/// Lead vehicle on the x axis with initial front-center position `x0`,
/// speed `v0` and constant deceleration until it stops.
fn braking_lead(x0: f64, y: f64, v0: f64, decel: f64) -> Result<ObstacleTrack> {
    let footprints = (1..=T)
        .map(|k| {
            let t = k as f64 * DT;
            let t_stop = if decel > 0.0 { v0 / decel } else { f64::INFINITY };
            let tt = t.min(t_stop);
            vehicle_box(x0 + v0 * tt - 0.5 * decel * tt * tt, y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ObstacleTrack {
        footprints,
        is_static: v0 == 0.0,
    })
}

fn static_obstacle(poly: Polygon) -> ObstacleTrack {
    ObstacleTrack {
        footprints: vec![poly; T],
        is_static: true,
    }
}

fn base_scene(id: &str, speed: f64, centerline: Centerline, drivable: Vec<Polygon>, obstacles: Vec<ObstacleTrack>) -> Scene {
    let placeholder = Trajectory::new((1..=T).map(|k| Pose2D::new(k as f64, 0.0, 0.0)).collect(), DT).expect("valid placeholder");
    Scene {
        id: id.to_string(),
        dt: DT,
        horizon_steps: T,
        ego: EgoState {
            pose: Pose2D::new(0.0, 0.0, 0.0),
            speed,
            station: EGO_STATION,
            lateral: 0.0,
        },
        centerline,
        drivable,
        obstacles,
        human_trajectory: placeholder,
        traffic_light_zone: None,
        human_subscores: None,
    }
}

/// Human driving along the centerline from `v0` with constant
/// acceleration `a`, never reversing.
fn with_human(mut scene: Scene, a: f64) -> Result<Scene> {
    let v0 = scene.ego.speed;
    let speeds: Vec<f64> = (1..=T).map(|k| (v0 + a * k as f64 * DT).max(0.0)).collect();
    scene.human_trajectory = build_candidate(&scene, &speeds, 0.0, 0.0, 1.0)?;
    Ok(scene)
}

fn straight_drivable() -> Result<Vec<Polygon>> {
    Ok(vec![Polygon::rect(-10.0, -HALF_ROAD, 120.0, HALF_ROAD)?])
}

pub fn straight(id: &str, speed: f64) -> Result<Scene> {
    with_human(base_scene(id, speed, straight_centerline()?, straight_drivable()?, vec![]), 0.0)
}

pub fn curve(id: &str, speed: f64, radius: f64) -> Result<Scene> {
    let cl = curved_centerline(radius)?;
    let road = road_polygon(&cl)?;
    with_human(base_scene(id, speed, cl, vec![road], vec![]), 0.0)
}

pub fn lead_brake(id: &str, speed: f64, gap: f64, lead_decel: f64) -> Result<Scene> {
    let lead = braking_lead(gap, 0.0, speed, lead_decel)?;
    with_human(base_scene(id, speed, straight_centerline()?, straight_drivable()?, vec![lead]), -1.5)
}

pub fn squeeze(id: &str, speed: f64, intrusion: f64) -> Result<Scene> {
    // parked cars whose inner edges reach `intrusion` metres from the centerline
    let half_w = VehicleDims::default().width / 2.0;
    let left = braking_lead(30.0, intrusion + half_w, 0.0, 0.0)?;
    let right = braking_lead(45.0, -(intrusion + half_w), 0.0, 0.0)?;
    with_human(base_scene(id, speed, straight_centerline()?, straight_drivable()?, vec![left, right]), 0.0)
}

pub fn off_route_bait(id: &str, speed: f64, lot_y: f64) -> Result<Scene> {
    let mut drivable = straight_drivable()?;
    drivable.push(Polygon::rect(15.0, HALF_ROAD - 0.5, 80.0, lot_y)?);
    let slow = braking_lead(30.0, 0.0, 3.0, 0.0)?;
    with_human(base_scene(id, speed, straight_centerline()?, drivable, vec![slow]), -1.0)
}

pub fn dead_end(id: &str, speed: f64, wall_x: f64) -> Result<Scene> {
    let drivable = vec![Polygon::rect(-10.0, -HALF_ROAD, wall_x + 3.0, HALF_ROAD)?];
    let wall = static_obstacle(Polygon::rect(wall_x, -HALF_ROAD, wall_x + 1.0, HALF_ROAD)?);
    with_human(base_scene(id, speed, straight_centerline()?, drivable, vec![wall]), -1.5)
}

/// The twelve demo scenes in a fixed order.
pub fn demo_scenes() -> Result<Vec<Scene>> {
    Ok(vec![
        straight("straight-a", 8.0)?,
        straight("straight-b", 12.0)?,
        curve("curve-a", 8.0, 60.0)?,
        curve("curve-b", 10.0, 50.0)?,
        lead_brake("lead-brake-a", 10.0, 25.0, 4.0)?,
        lead_brake("lead-brake-b", 8.0, 18.0, 3.0)?,
        squeeze("squeeze-a", 6.0, 2.4)?,
        squeeze("squeeze-b", 8.0, 1.6)?,
        off_route_bait("off-route-a", 8.0, 20.0)?,
        off_route_bait("off-route-b", 10.0, 14.0)?,
        dead_end("dead-end-a", 8.0, 45.0)?,
        dead_end("dead-end-b", 6.0, 32.0)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{compute_subscores, EvaluatorConfig};

    #[test]
    fn twelve_valid_scenes_round_trip() {
        let scenes = demo_scenes().unwrap();
        assert_eq!(scenes.len(), 12);
        for s in &scenes {
            let back = Scene::from_json_str(&s.to_json_string().unwrap()).unwrap();
            assert_eq!(back.id, s.id);
            assert_eq!(back.obstacles.len(), s.obstacles.len());
            assert!((back.ego.station - EGO_STATION).abs() < 1e-9, "{}", s.id);
        }
    }

    #[test]
    fn humans_are_safe_and_on_road() {
        let cfg = EvaluatorConfig::default();
        for s in demo_scenes().unwrap() {
            let sub = compute_subscores(&s, &s.human_trajectory, &cfg).unwrap();
            assert_eq!((sub.nc, sub.dac, sub.ddc), (1.0, 1.0, 1.0), "{}: {sub:?}", s.id);
            assert_eq!(sub.comfort, 1.0, "{}", s.id);
        }
    }
}
