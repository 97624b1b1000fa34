#ifndef CROSSLEARN_H
#define CROSSLEARN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum ClStatus {
  CL_STATUS_OK = 0,
  CL_STATUS_NULL_POINTER = 1,
  CL_STATUS_INVALID_ARGUMENT = 2,
  CL_STATUS_DIMENSION_MISMATCH = 3,
  CL_STATUS_ZERO_STATE_MASS = 4,
  CL_STATUS_INFEASIBLE = 5,
  CL_STATUS_NUMERICAL = 6,
  CL_STATUS_BUFFER_TOO_SMALL = 7,
  CL_STATUS_PANIC = 8,
  CL_STATUS_OTHER = 9,
} ClStatus;

// Projection strategy used by [`cl_instance_solve`].
typedef enum ClStrategy {
  CL_STRATEGY_CROSS_CENTERED = 0,
  CL_STRATEGY_AVERAGE_CENTERED = 1,
} ClStrategy;

typedef struct ClInstance ClInstance;

typedef struct ClMdp ClMdp;

typedef struct ClMeasure ClMeasure;

typedef struct ClPolicy ClPolicy;

typedef struct ClSolution ClSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length
// without the terminator, or 0 when there is no error.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t cl_last_error_message(char *buf, size_t len);

// Creates an MDP. `transition` holds `n_states * n_actions` rows of
// `n_states` probabilities, row `s * n_actions + a`.
//
// # Safety
// Buffers must hold the stated number of values; `out` must be writable.
enum ClStatus cl_mdp_new(size_t n_states,
                         size_t n_actions,
                         const double *transition,
                         double discount,
                         const double *initial_dist,
                         struct ClMdp **out);

// Windy gridworld with `cols` wind entries and an absorbing goal.
//
// # Safety
// `wind` must hold `cols` values; `out` must be writable.
enum ClStatus cl_mdp_gridworld(size_t rows,
                               size_t cols,
                               const uint32_t *wind,
                               size_t goal_row,
                               size_t goal_col,
                               double discount,
                               struct ClMdp **out);

// # Safety
// `mdp` must be a live handle; the out pointers may be null.
enum ClStatus cl_mdp_dims(const struct ClMdp *mdp, size_t *n_states, size_t *n_actions);

// # Safety
// `mdp` must be null or a handle not yet freed.
void cl_mdp_free(struct ClMdp *mdp);

// Policy from `n_states` rows of `n_actions` probabilities.
//
// # Safety
// `probs` must hold `n_states * n_actions` values; `out` must be writable.
enum ClStatus cl_policy_new(size_t n_states,
                            size_t n_actions,
                            const double *probs,
                            struct ClPolicy **out);

// # Safety
// `out` must be writable.
enum ClStatus cl_policy_uniform(size_t n_states, size_t n_actions, struct ClPolicy **out);

// Copies the probabilities into `out` (capacity `len`).
//
// # Safety
// `policy` must be live; `out` must hold `len` values.
enum ClStatus cl_policy_probs(const struct ClPolicy *policy, double *out, size_t len);

// # Safety
// `policy` must be null or a handle not yet freed.
void cl_policy_free(struct ClPolicy *policy);

// # Safety
// `values` must hold `n_states * n_actions` values; `out` must be writable.
enum ClStatus cl_measure_new(size_t n_states,
                             size_t n_actions,
                             const double *values,
                             struct ClMeasure **out);

// # Safety
// `measure` must be live; `out` must hold `len` values.
enum ClStatus cl_measure_values(const struct ClMeasure *measure, double *out, size_t len);

// # Safety
// `measure` must be null or a handle not yet freed.
void cl_measure_free(struct ClMeasure *measure);

// Exact discounted occupation measure of `policy` in `mdp`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum ClStatus cl_occupation_from_policy(const struct ClMdp *mdp,
                                        const struct ClPolicy *policy,
                                        struct ClMeasure **out);

// # Safety
// `measure` must be live; `out` must be writable.
enum ClStatus cl_policy_from_occupation(const struct ClMeasure *measure, struct ClPolicy **out);

// Euclidean projection of `v` onto the simplex intersected with the box
// `[center - epsilon, center + epsilon]`.
//
// # Safety
// `v`, `center` and `out` must hold `n` values; `center` must lie on the simplex.
enum ClStatus cl_project_box_simplex(const double *v,
                                     const double *center,
                                     size_t n,
                                     double epsilon,
                                     double *out);

// Cross-learning instance over `n_envs` environments with the identity
// cost basis. Handles are copied; the caller keeps ownership.
//
// # Safety
// `mdps` and `experts` must each hold `n_envs` live handles.
enum ClStatus cl_instance_new(const struct ClMdp *const *mdps,
                              const struct ClMeasure *const *experts,
                              size_t n_envs,
                              double epsilon,
                              struct ClInstance **out);

// # Safety
// `instance` must be null or a handle not yet freed.
void cl_instance_free(struct ClInstance *instance);

// Solves the McCormick relaxation and recovers feasible policies.
//
// # Safety
// `instance` must be live; `out` must be writable.
enum ClStatus cl_instance_solve(const struct ClInstance *instance,
                                enum ClStrategy strategy,
                                struct ClSolution **out);

// # Safety
// `solution` must be live; out pointers may be null.
enum ClStatus cl_solution_values(const struct ClSolution *solution,
                                 double *lower_bound,
                                 double *achieved_objective,
                                 size_t *n_envs);

// Policy `index` of the solution; `index == n_envs` selects the
// cross-learned policy.
//
// # Safety
// `solution` must be live; `out` must be writable.
enum ClStatus cl_solution_policy(const struct ClSolution *solution,
                                 size_t index,
                                 struct ClPolicy **out);

// # Safety
// `solution` must be null or a handle not yet freed.
void cl_solution_free(struct ClSolution *solution);

// Rollouts from uniform non-goal starts that reach `goal_state` within
// `max_steps`.
//
// # Safety
// Handles must be live; `successes` must be writable.
enum ClStatus cl_evaluate_success(const struct ClMdp *mdp,
                                  size_t goal_state,
                                  const struct ClPolicy *policy,
                                  size_t n_traj,
                                  size_t max_steps,
                                  uint64_t seed,
                                  size_t *successes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CROSSLEARN_H */
