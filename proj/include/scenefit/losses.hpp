#pragma once

#include <string>
#include <vector>

#include "scenefit/scene.hpp"

namespace scenefit {

// Weights and robustifier scales for every energy term. lambda1..lambda6
// weight the scene/joint terms of the total energy; the w_* factors weight
// the within-body terms.
struct LossWeights {
    double lambda1 = 1.0;    // scene 2D reprojection
    double lambda2 = 0.1;    // scene SDF collision
    double lambda3 = 10.0;   // object-on-ground
    double lambda4 = 20.0;   // body-on-ground
    double lambda5 = 1e3;    // body-scene contact
    double lambda6 = 1e2;    // body-scene penetration
    double w_keypoint = 1.0;
    double w_pose_prior = 1.0;
    double w_bend = 1.0;
    double w_selfpen = 100.0;
    double sigma_keypoint = 100.0;  // pixels
    double sigma_contact = 0.05;    // meters
    double smooth_l1_beta = 1.0;    // pixels

    void validate() const;  // throws InvalidArgument on non-finite or non-positive scales
};

// Quadratic within beta, linear beyond, C1 everywhere.
double smooth_l1(double x, double beta);

// Bounded robust penalty e^2 s^2 / (e^2 + s^2), saturating at s^2.
double geman_mcclure(double e, double sigma);

// --- individual terms (unweighted) ----------------------------------------
// All terms return 0 when their subject is absent (e.g. body terms on a
// scene without a human), except where a precondition is documented.

// Sum over detections of confidence * GM(pixel error). Keypoints behind the
// camera contribute the saturation value confidence * sigma^2.
double loss_keypoint_reprojection(const SceneState& state, const LossWeights& w);

// Mean over objects of the smooth-L1 gap between the 8 coordinates of the
// projected box rectangle and the detection rectangle. Throws
// NonPositiveDepth (naming the object) if a box corner reaches the camera
// plane; throws NoObjects on an objectless scene.
double loss_scene_reprojection(const SceneState& state, const LossWeights& w);

// Mean over objects of the squared negative signed distance from the cells
// of object i's box to the union of all other objects (frozen grids).
double loss_scene_collision(const SceneState& state);

// Mean over objects of |box bottom - layout floor|.
double loss_obj_ground(const SceneState& state);

// |lowest body vertex - layout floor|.
double loss_body_ground(const SceneState& state);

// Sum over contact vertices of GM(distance to the nearest scene-object mesh
// vertex). Uses the frozen nearest picks when the context pins them. Throws
// NoObjects when a body is present but the scene has no objects.
double loss_contact(const SceneState& state, const LossWeights& w);

// Sum over body vertices of squared negative signed distance to the frozen
// object union.
double loss_body_penetration(const SceneState& state);

// Within-body energy: keypoint reprojection + weighted pose prior, bending
// prior and self-penetration.
double loss_body_total(const SceneState& state, const LossWeights& w);

// Every term of the full energy, weighted as in `total`.
struct LossBreakdown {
    double keypoint = 0;
    double pose_prior = 0;
    double bending = 0;
    double self_penetration = 0;
    double body_total = 0;  // the four above, with their w_* weights
    double scene_reprojection = 0;
    double scene_collision = 0;
    double obj_ground = 0;
    double body_ground = 0;
    double contact = 0;
    double body_penetration = 0;
    double total = 0;  // body_total + lambda-weighted scene/joint terms
};

LossBreakdown loss_total(const SceneState& state, const LossWeights& w);

}  // namespace scenefit
