/* cc -I include examples/smoke.c ../../target/release/libnonsmooth_adm_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "nonsmooth_adm.h"

int main(void) {
    NsaController *ctrl = NULL;
    if (nsa_controller_new("fig3_one_dof", &ctrl) != NSA_STATUS_OK) {
        fprintf(stderr, "%s\n", nsa_last_error_message());
        return 1;
    }
    double q = -0.1, qd = 0.0, fc = 0.0, fd = -0.5, tau = 0.0;
    nsa_controller_reset(ctrl, &q, &qd, 1);
    for (int k = 0; k < 5; ++k) {
        if (nsa_controller_step(ctrl, &q, &fc, &fd, 1, &tau, NULL) != NSA_STATUS_OK) {
            fprintf(stderr, "%s\n", nsa_last_error_message());
            nsa_controller_free(ctrl);
            return 1;
        }
        printf("k=%d tau=%.6f\n", k, tau);
    }
    nsa_controller_free(ctrl);

    char *metrics = NULL;
    if (nsa_run_scenario("msta_bench", &metrics) == NSA_STATUS_OK) {
        printf("%.80s...\n", metrics);
        nsa_string_free(metrics);
    }
    return 0;
}
