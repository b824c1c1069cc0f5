#ifndef CONRES_H
#define CONRES_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum ConresStatus {
  CONRES_STATUS_OK = 0,
  CONRES_STATUS_NULL_POINTER = 1,
  /*
   Malformed JSON or text that is not UTF-8.
   */
  CONRES_STATUS_PARSE = 2,
  /*
   Input violates a precondition (bad ids, non-orthogonal signature, ...).
   */
  CONRES_STATUS_VALIDATION = 3,
  /*
   A numerical routine failed on valid input.
   */
  CONRES_STATUS_COMPUTATION = 4,
  /*
   The caller's output buffer is too small.
   */
  CONRES_STATUS_BUFFER_TOO_SMALL = 5,
  CONRES_STATUS_PANIC = 6,
} ConresStatus;

/*
 Opaque connection graph.
 */
typedef struct ConresGraph ConresGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread, or null if none.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *conres_last_error(void);

/*
 Library version as a static nul-terminated string.
 */
const char *conres_version(void);

/*
 Parse a `conres/1` JSON document (1-based vertex ids) into a new handle.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum ConresStatus conres_graph_from_json(const char *json, struct ConresGraph **out);

/*
 Build a graph from `m` edges `(us[k], vs[k])` with weights `ws[k]` and
 `d x d` signatures stored consecutively in `sigmas` (row-major, oriented
 `us[k] -> vs[k]`).

 # Safety
 `us`, `vs`, `ws` must hold `m` values and `sigmas` `m * d * d` values.
 */
enum ConresStatus conres_graph_from_arrays(size_t n,
                                           size_t d,
                                           size_t m,
                                           const size_t *us,
                                           const size_t *vs,
                                           const double *ws,
                                           const double *sigmas,
                                           struct ConresGraph **out);

/*
 Cycle on `n` vertices with a planar rotation by `theta` on edge (0,1).

 # Safety
 `out` must be a valid pointer.
 */
enum ConresStatus conres_graph_cycle(size_t n, double theta, struct ConresGraph **out);

/*
 Wheatstone bridge with a 3D rotation by `theta` on edge (1,3).

 # Safety
 `out` must be a valid pointer.
 */
enum ConresStatus conres_graph_wheatstone(double theta, struct ConresGraph **out);

/*
 Two `K_m` cliques joined by the bridge 0-1-2 with rotations on (0,1) and (1,2).

 # Safety
 `out` must be a valid pointer.
 */
enum ConresStatus conres_graph_dumbbell(size_t m,
                                        double theta12,
                                        double theta23,
                                        struct ConresGraph **out);

/*
 Release a handle. Null is ignored.

 # Safety
 `g` must come from this library and not have been freed already.
 */
void conres_graph_free(struct ConresGraph *g);

/*
 Number of vertices, 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
size_t conres_graph_n(const struct ConresGraph *g);

/*
 Signature dimension, 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
size_t conres_graph_d(const struct ConresGraph *g);

/*
 Serialize to a `conres/1` JSON document; free the result with
 `conres_string_free`.

 # Safety
 `g` must be a live handle and `out` a valid pointer.
 */
enum ConresStatus conres_graph_to_json(const struct ConresGraph *g, char **out);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void conres_string_free(char *s);

/*
 Classical effective resistance between `i` and `j` of the underlying graph.

 # Safety
 `g` must be a live handle and `out` a valid pointer.
 */
enum ConresStatus conres_classical_resistance(const struct ConresGraph *g,
                                              size_t i,
                                              size_t j,
                                              double *out);

/*
 Scalar connection resistance `(Tr C_ii^-1 + Tr C_jj^-1) / 2d`.

 # Safety
 `g` must be a live handle and `out` a valid pointer.
 */
enum ConresStatus conres_scalar_resistance(const struct ConresGraph *g,
                                           size_t i,
                                           size_t j,
                                           double *out);

/*
 Chung's connection resistance; defined for edges, or any pair when the
 signature is consistent.

 # Safety
 `g` must be a live handle and `out` a valid pointer.
 */
enum ConresStatus conres_chung_resistance(const struct ConresGraph *g,
                                          size_t i,
                                          size_t j,
                                          double *out);

/*
 `2d x 2d` conductance matrix of the pair, ordered `(i, j)`; `len >= 4 d^2`.

 # Safety
 `g` must be a live handle and `out` must hold `len` values.
 */
enum ConresStatus conres_conductance_matrix(const struct ConresGraph *g,
                                            size_t i,
                                            size_t j,
                                            double *out,
                                            size_t len);

/*
 `2d x 2d` resistance matrix of the pair, ordered `(i, j)`; `len >= 4 d^2`.

 # Safety
 `g` must be a live handle and `out` must hold `len` values.
 */
enum ConresStatus conres_resistance_matrix(const struct ConresGraph *g,
                                           size_t i,
                                           size_t j,
                                           double *out,
                                           size_t len);

/*
 Mean path signature of walks from `i` stopped at `j`; `len >= d^2`.

 # Safety
 `g` must be a live handle and `out` must hold `len` values.
 */
enum ConresStatus conres_omega0(const struct ConresGraph *g,
                                size_t i,
                                size_t j,
                                double *out,
                                size_t len);

/*
 Monte Carlo estimate of `conres_omega0` from `samples` walks. `stderr_out`
 may be null; otherwise it receives the entrywise standard errors.

 # Safety
 `g` must be a live handle; `out` and a non-null `stderr_out` must hold
 `len` values.
 */
enum ConresStatus conres_omega0_monte_carlo(const struct ConresGraph *g,
                                            size_t i,
                                            size_t j,
                                            size_t samples,
                                            uint64_t seed,
                                            double *out,
                                            double *stderr_out,
                                            size_t len);

/*
 Dimension of the kernel of the connection Laplacian.

 # Safety
 `g` must be a live handle and `out` a valid pointer.
 */
enum ConresStatus conres_nullity(const struct ConresGraph *g, size_t *out);

/*
 Whether every cycle of the signature has identity holonomy.

 # Safety
 `g` must be a live handle and `out` a valid pointer.
 */
enum ConresStatus conres_is_consistent(const struct ConresGraph *g, bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONRES_H */
