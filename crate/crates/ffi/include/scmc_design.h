#ifndef SCMC_DESIGN_H
#define SCMC_DESIGN_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Row index reported for design points that are not input rows.
 */
#define SCMC_NO_ROW (size_t)~0

typedef enum ScmcStatus {
  SCMC_STATUS_OK = 0,
  SCMC_STATUS_NULL_POINTER = 1,
  SCMC_STATUS_INVALID_ARGUMENT = 2,
  SCMC_STATUS_PARSE = 3,
  SCMC_STATUS_DOMAIN = 4,
  SCMC_STATUS_POLYGON = 5,
  SCMC_STATUS_SAMPLER_FAILED = 6,
  SCMC_STATUS_DESIGN_FAILED = 7,
  SCMC_STATUS_DISCONNECTED_GRAPH = 8,
  SCMC_STATUS_IO = 9,
  SCMC_STATUS_PANIC = 10,
} ScmcStatus;

typedef enum ScmcCriterion {
  SCMC_CRITERION_CMM = 0,
  SCMC_CRITERION_ARD = 1,
  SCMC_CRITERION_MAX_PRO = 2,
} ScmcCriterion;

typedef enum ScmcFffSummary {
  SCMC_FFF_SUMMARY_CENTROID = 0,
  SCMC_FFF_SUMMARY_MEDOID_MAXPRO = 1,
} ScmcFffSummary;

/**
 * A design built on a point buffer.
 */
typedef struct ScmcDesign ScmcDesign;

/**
 * A constrained region.
 */
typedef struct ScmcRegion ScmcRegion;

/**
 * A sampled particle cloud with its tempering schedule.
 */
typedef struct ScmcSamples ScmcSamples;

/**
 * Sampler settings; start from [`scmc_options_default`].
 */
typedef struct ScmcOptions {
  size_t n_particles;
  double tau_target;
  double ess_fraction;
  size_t mh_sweeps_per_step;
  uint64_t seed;
  double target_acceptance;
  double eq_tol;
  bool conditional_resampling;
  size_t max_steps;
} ScmcOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after a
 * success. Valid until the next call into this library on the same thread.
 */
const char *scmc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *scmc_version(void);

struct ScmcOptions scmc_options_default(void);

/**
 * The crescent `sqrt(33 x2^2 + 1) <= x1 <= sqrt(14 x2^2 + 2)` on `[-4, 4]^2`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum ScmcStatus scmc_region_crescent(struct ScmcRegion **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum ScmcStatus scmc_region_ball(double radius, size_t dim, struct ScmcRegion **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum ScmcStatus scmc_region_annulus(double inner, double outer, struct ScmcRegion **out);

/**
 * The torus surface `(major - sqrt(x1^2 + x2^2))^2 + x3^2 = minor^2`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum ScmcStatus scmc_region_torus(double major, double minor, struct ScmcRegion **out);

/**
 * Region from constraint expressions such as `"x1^2 + x2^2 <= 1"` on the
 * box `[lower, upper]`.
 *
 * # Safety
 * `exprs` must point to `n_exprs` NUL-terminated strings; `lower` and
 * `upper` to `dim` values each; `out` must be valid for writes.
 */
enum ScmcStatus scmc_region_from_constraints(const char *const *exprs,
                                             size_t n_exprs,
                                             const double *lower,
                                             const double *upper,
                                             size_t dim,
                                             struct ScmcRegion **out);

/**
 * Planar region bounded by the polygons of a GeoJSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum ScmcStatus scmc_region_from_geojson(const char *path, struct ScmcRegion **out);

/**
 * # Safety
 * `region` must be null or a live region handle.
 */
size_t scmc_region_dim(const struct ScmcRegion *region);

/**
 * # Safety
 * `region` must be null or a live region handle.
 */
size_t scmc_region_n_constraints(const struct ScmcRegion *region);

/**
 * Per-constraint deviation of `x`: the residual for inequalities, satisfied
 * when `<= 0`, and its absolute value for equalities.
 *
 * # Safety
 * `x` must point to `dim` values and `out_dev` to
 * `scmc_region_n_constraints(region)` writable values.
 */
enum ScmcStatus scmc_region_deviation(const struct ScmcRegion *region,
                                      const double *x,
                                      size_t dim,
                                      double *out_dev);

/**
 * # Safety
 * `x` must point to `dim` values; `out` must be valid for writes.
 */
enum ScmcStatus scmc_region_is_feasible(const struct ScmcRegion *region,
                                        const double *x,
                                        size_t dim,
                                        double eq_tol,
                                        bool *out);

/**
 * # Safety
 * `region` must be null or a handle not yet freed.
 */
void scmc_region_free(struct ScmcRegion *region);

/**
 * Runs the sampler. `options` may be null for the defaults.
 *
 * # Safety
 * `region` must be a live handle, `options` null or valid, `out` valid for
 * writes.
 */
enum ScmcStatus scmc_sample(const struct ScmcRegion *region,
                            const struct ScmcOptions *options,
                            struct ScmcSamples **out);

/**
 * # Safety
 * `s` must be null or a live samples handle.
 */
size_t scmc_samples_len(const struct ScmcSamples *s);

/**
 * # Safety
 * `s` must be null or a live samples handle.
 */
size_t scmc_samples_dim(const struct ScmcSamples *s);

/**
 * Row-major `len * dim` coordinates, owned by the handle.
 *
 * # Safety
 * `s` must be null or a live samples handle.
 */
const double *scmc_samples_points(const struct ScmcSamples *s);

/**
 * Number of tempering steps taken.
 *
 * # Safety
 * `s` must be null or a live samples handle.
 */
size_t scmc_samples_steps(const struct ScmcSamples *s);

/**
 * Constraint-strength schedule, `steps + 1` values starting at zero.
 *
 * # Safety
 * `s` must be null or a live samples handle.
 */
const double *scmc_samples_taus(const struct ScmcSamples *s);

/**
 * Effective sample size before resampling at each step, `steps` values.
 *
 * # Safety
 * `s` must be null or a live samples handle.
 */
const double *scmc_samples_ess(const struct ScmcSamples *s);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void scmc_samples_free(struct ScmcSamples *s);

/**
 * Greedy design of `p` rows of the `n x dim` row-major buffer. `weights`
 * may be null; otherwise it holds `dim` coordinate weights and is only
 * accepted with `SCMC_CRITERION_CMM`. `ard_k` is ignored by other criteria.
 *
 * # Safety
 * `points` must hold `n * dim` values, `weights` null or `dim` values,
 * `out` valid for writes.
 */
enum ScmcStatus scmc_design_greedy(const double *points,
                                   size_t n,
                                   size_t dim,
                                   enum ScmcCriterion criterion,
                                   uint32_t ard_k,
                                   const double *weights,
                                   size_t p,
                                   uint64_t seed,
                                   struct ScmcDesign **out);

/**
 * Conditional maximin design under shortest-path distance on the `k`
 * nearest-neighbour graph of the buffer.
 *
 * # Safety
 * `points` must hold `n * dim` values, `out` valid for writes.
 */
enum ScmcStatus scmc_design_geodesic(const double *points,
                                     size_t n,
                                     size_t dim,
                                     size_t k,
                                     size_t p,
                                     uint64_t seed,
                                     struct ScmcDesign **out);

/**
 * Ward clustering of the buffer into `p` clusters, one summary point per
 * cluster. Centroid summaries have no input row.
 *
 * # Safety
 * `points` must hold `n * dim` values, `out` valid for writes.
 */
enum ScmcStatus scmc_design_fff(const double *points,
                                size_t n,
                                size_t dim,
                                size_t p,
                                enum ScmcFffSummary summary,
                                struct ScmcDesign **out);

/**
 * Number of design points.
 *
 * # Safety
 * `d` must be null or a live design handle.
 */
size_t scmc_design_size(const struct ScmcDesign *d);

/**
 * # Safety
 * `d` must be null or a live design handle.
 */
size_t scmc_design_dim(const struct ScmcDesign *d);

/**
 * Row-major `size * dim` coordinates in selection order.
 *
 * # Safety
 * `d` must be null or a live design handle.
 */
const double *scmc_design_points(const struct ScmcDesign *d);

/**
 * Input row of each design point, or `SCMC_NO_ROW` for synthesized points.
 *
 * # Safety
 * `d` must be null or a live design handle.
 */
const size_t *scmc_design_rows(const struct ScmcDesign *d);

/**
 * Cluster label of every input row for clustering designs; null otherwise.
 *
 * # Safety
 * `d` must be null or a live design handle.
 */
const size_t *scmc_design_labels(const struct ScmcDesign *d);

/**
 * Minimum pairwise distance under the design metric; infinite for a
 * single point, NaN for a null handle.
 *
 * # Safety
 * `d` must be null or a live design handle.
 */
double scmc_design_mindist(const struct ScmcDesign *d);

/**
 * # Safety
 * `d` must be null or a handle not yet freed.
 */
void scmc_design_free(struct ScmcDesign *d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCMC_DESIGN_H */
