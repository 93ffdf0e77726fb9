#ifndef LAGARTO_H
#define LAGARTO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LagartoStatus {
  LAGARTO_STATUS_OK = 0,
  LAGARTO_STATUS_NULL_ARGUMENT = 1,
  LAGARTO_STATUS_INVALID_UTF8 = 2,
  LAGARTO_STATUS_INVALID_CONFIG = 3,
  LAGARTO_STATUS_ASSEMBLY_FAILED = 4,
  LAGARTO_STATUS_IMAGE_FAILED = 5,
  LAGARTO_STATUS_OUT_OF_RANGE = 6,
  LAGARTO_STATUS_PANIC = 7,
} LagartoStatus;

/**
 * Simulator instance. Only ever handled through a pointer.
 */
typedef struct LagartoMachine LagartoMachine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Assemble `source` and build a machine ready to run it.
 *
 * # Safety
 * `source` must be a NUL-terminated string, `config_json` null or a
 * NUL-terminated string, and `out` a valid pointer.
 */
enum LagartoStatus lagarto_machine_from_source(const char *source,
                                               const char *config_json,
                                               struct LagartoMachine **out);

/**
 * Build a machine from hex images. `dmem_hex` may be null.
 *
 * # Safety
 * String arguments must be null (where allowed) or NUL-terminated, and
 * `out` a valid pointer.
 */
enum LagartoStatus lagarto_machine_from_hex(const char *imem_hex,
                                            const char *dmem_hex,
                                            const char *config_json,
                                            struct LagartoMachine **out);

/**
 * # Safety
 * `machine` must be null or a pointer obtained from this library that has
 * not been freed.
 */
void lagarto_machine_free(struct LagartoMachine *machine);

/**
 * Back to cycle 0 with the loaded program.
 *
 * # Safety
 * `machine` must be a live handle.
 */
enum LagartoStatus lagarto_machine_reset(struct LagartoMachine *machine);

/**
 * Advance up to `cycles` clock cycles, stopping early on halt.
 *
 * # Safety
 * `machine` must be a live handle.
 */
enum LagartoStatus lagarto_machine_step(struct LagartoMachine *machine, uint64_t cycles);

/**
 * Run until halt or until the machine's cycle counter reaches
 * `max_cycles`.
 *
 * # Safety
 * `machine` must be a live handle.
 */
enum LagartoStatus lagarto_machine_run(struct LagartoMachine *machine, uint64_t max_cycles);

/**
 * Cycles elapsed since reset; 0 for a null handle.
 *
 * # Safety
 * `machine` must be null or a live handle.
 */
uint64_t lagarto_machine_cycle(const struct LagartoMachine *machine);

/**
 * 1 when halted, 0 when still runnable, -1 for a null handle.
 *
 * # Safety
 * `machine` must be null or a live handle.
 */
int lagarto_machine_is_halted(const struct LagartoMachine *machine);

/**
 * # Safety
 * `machine` must be a live handle and `out` valid for one write.
 */
enum LagartoStatus lagarto_machine_read_gpr(const struct LagartoMachine *machine,
                                            uint32_t index,
                                            uint32_t *out);

/**
 * Raw bits of `$f<index>`.
 *
 * # Safety
 * `machine` must be a live handle and `out` valid for one write.
 */
enum LagartoStatus lagarto_machine_read_fpr(const struct LagartoMachine *machine,
                                            uint32_t index,
                                            uint32_t *out);

/**
 * Aligned word from instruction or data memory.
 *
 * # Safety
 * `machine` must be a live handle and `out` valid for one write.
 */
enum LagartoStatus lagarto_machine_read_word(const struct LagartoMachine *machine,
                                             uint32_t addr,
                                             uint32_t *out);

/**
 * Full machine state as JSON, or null on a null handle.
 *
 * # Safety
 * `machine` must be null or a live handle.
 */
char *lagarto_machine_snapshot_json(const struct LagartoMachine *machine);

/**
 * Everything the program has printed so far.
 *
 * # Safety
 * `machine` must be null or a live handle.
 */
char *lagarto_machine_output(const struct LagartoMachine *machine);

/**
 * Assemble `source` with the default memory layout. On success `*imem_out`
 * and `*dmem_out` receive hex image texts (the data image may be empty).
 *
 * # Safety
 * `source` must be NUL-terminated; both out pointers must be valid.
 */
enum LagartoStatus lagarto_assemble_to_hex(const char *source, char **imem_out, char **dmem_out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void lagarto_string_free(char *s);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on the same thread.
 */
const char *lagarto_last_error_message(void);

const char *lagarto_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LAGARTO_H */
