#ifndef CGA_H
#define CGA_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum CgaStatus {
  CGA_STATUS_OK = 0,
  CGA_STATUS_NULL_POINTER = 1,
  CGA_STATUS_INVALID_ARGUMENT = 2,
  CGA_STATUS_EMPTY_INPUT = 3,
  CGA_STATUS_QP_OUT_OF_RANGE = 4,
  CGA_STATUS_COORDINATE_OUT_OF_RANGE = 5,
  CGA_STATUS_QP_MISMATCH = 6,
  CGA_STATUS_MALFORMED_INPUT = 7,
  CGA_STATUS_IO = 8,
  CGA_STATUS_NOT_FOUND = 9,
  CGA_STATUS_PANIC = 10,
} CgaStatus;

/**
 * Opaque cloud stored as a compressed geometric array.
 */
typedef struct CgaCloud CgaCloud;

/**
 * A voxel with its color.
 */
typedef struct CgaPoint {
  uint32_t x;
  uint32_t y;
  uint32_t z;
  uint8_t r;
  uint8_t g;
  uint8_t b;
} CgaPoint;

/**
 * Cost counters of one operation.
 */
typedef struct CgaMetrics {
  uint64_t wall_ns;
  uint64_t element_reads;
  uint64_t node_hops;
  uint64_t bytes;
} CgaMetrics;

/**
 * Bytes owned by the library.
 */
typedef struct CgaBuffer {
  uint8_t *data;
  size_t len;
} CgaBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *cga_last_error(void);

/**
 * Builds a cloud from `len` points at bit depth `qp`. Duplicate
 * coordinates are merged with their colors averaged.
 *
 * # Safety
 * `points` must reference `len` readable values; `out_cloud` must be
 * writable.
 */
enum CgaStatus cga_cloud_build(const struct CgaPoint *points,
                               size_t len,
                               uint8_t qp,
                               bool has_color,
                               struct CgaCloud **out_cloud,
                               struct CgaMetrics *out_metrics);

/**
 * Loads a `.ply` or text xyz file and voxelizes it at bit depth `qp`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_cloud` must be writable.
 */
enum CgaStatus cga_cloud_load(const char *path, uint8_t qp, struct CgaCloud **out_cloud);

/**
 * Releases a cloud. Null is ignored.
 *
 * # Safety
 * `cloud` must come from this library and not be used afterwards.
 */
void cga_cloud_free(struct CgaCloud *cloud);

/**
 * Number of stored points; 0 for null.
 *
 * # Safety
 * `cloud` must be null or a live handle.
 */
size_t cga_cloud_len(const struct CgaCloud *cloud);

/**
 * Storage footprint in bytes; 0 for null.
 *
 * # Safety
 * `cloud` must be null or a live handle.
 */
uint64_t cga_cloud_footprint(const struct CgaCloud *cloud);

/**
 * Copies up to `capacity` points in lexicographic order into `dst` and
 * stores the number written in `out_written`.
 *
 * # Safety
 * `dst` must have room for `capacity` points.
 */
enum CgaStatus cga_cloud_points(const struct CgaCloud *cloud,
                                struct CgaPoint *dst,
                                size_t capacity,
                                size_t *out_written);

/**
 * Exact lookup. Returns `NotFound` when the coordinate is absent; on
 * success the stored color is written into `out_point`.
 *
 * # Safety
 * Pointers must be valid; `out_metrics` may be null.
 */
enum CgaStatus cga_cloud_lookup(const struct CgaCloud *cloud,
                                uint32_t x,
                                uint32_t y,
                                uint32_t z,
                                struct CgaPoint *out_point,
                                struct CgaMetrics *out_metrics);

/**
 * Nearest stored point to `(x, y, z)`; ties go to the lexicographically
 * smaller point.
 *
 * # Safety
 * Pointers must be valid; `out_distance_squared` and `out_metrics` may be
 * null.
 */
enum CgaStatus cga_cloud_nearest(const struct CgaCloud *cloud,
                                 uint32_t x,
                                 uint32_t y,
                                 uint32_t z,
                                 struct CgaPoint *out_point,
                                 uint64_t *out_distance_squared,
                                 struct CgaMetrics *out_metrics);

/**
 * Union of two clouds. With `average` false the colors of `base` win on
 * shared coordinates; otherwise the two colors are averaged.
 *
 * # Safety
 * Pointers must be valid; `out_metrics` may be null.
 */
enum CgaStatus cga_cloud_merge(const struct CgaCloud *base,
                               const struct CgaCloud *other,
                               bool average,
                               struct CgaCloud **out_cloud,
                               struct CgaMetrics *out_metrics);

/**
 * Serializes a cloud as PLY, binary little-endian when `binary` is set.
 *
 * # Safety
 * Pointers must be valid. Release the buffer with `cga_buffer_free`.
 */
enum CgaStatus cga_cloud_to_ply(const struct CgaCloud *cloud,
                                bool binary,
                                struct CgaBuffer *out_buffer);

/**
 * Encodes `count` clouds as one container stream. The first frame is intra
 * coded and the rest predict from their decoded predecessor.
 *
 * # Safety
 * `clouds` must reference `count` live handles. Release the buffer with
 * `cga_buffer_free`.
 */
enum CgaStatus cga_encode(const struct CgaCloud *const *clouds,
                          size_t count,
                          uint16_t step,
                          struct CgaBuffer *out_buffer);

/**
 * Number of frames in a container stream.
 *
 * # Safety
 * `data` must reference `len` readable bytes.
 */
enum CgaStatus cga_stream_frame_count(const uint8_t *data, size_t len, size_t *out_count);

/**
 * Decodes frame `index` of a container stream. Earlier frames are decoded
 * as needed for prediction.
 *
 * # Safety
 * `data` must reference `len` readable bytes; `out_cloud` must be writable.
 */
enum CgaStatus cga_decode_frame(const uint8_t *data,
                                size_t len,
                                size_t index,
                                struct CgaCloud **out_cloud);

/**
 * Releases a buffer returned by the library and resets it to empty.
 *
 * # Safety
 * `buffer` must be null or hold a buffer produced by this library.
 */
void cga_buffer_free(struct CgaBuffer *buffer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CGA_H */
