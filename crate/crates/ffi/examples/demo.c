/* Counts a hyperbolic-cross set and runs a small fixed-point solve. */
#include <stdio.h>
#include "sgehc.h"

int main(void) {
    SgeHcSet *set = NULL;
    if (sge_hc_set_new(2, 0.15915494309189535, 3.0, -1, &set) != SGE_STATUS_OK) {
        fprintf(stderr, "%s\n", sge_last_error());
        return 1;
    }
    printf("indices %zu\n", sge_hc_set_len(set));
    sge_hc_set_free(set);

    const char *cfg =
        "{\"problem\": \"zero:dim=2;lower=-1;upper=1\", \"splits\": [1, 1],"
        " \"nodes\": 20, \"tau\": 0.01, \"report_times\": [0.1]}";
    SgeRun *run = NULL;
    if (sge_run_solve(cfg, &run) != SGE_STATUS_OK) {
        fprintf(stderr, "%s\n", sge_last_error());
        return 1;
    }
    SgeReportRow row;
    sge_run_row(run, 0, &row);
    printf("t %.2f linf %.1e\n", row.time, row.linf);
    sge_run_free(run);

    if (sge_hc_set_new(2, 0.2, 0.5, -1, &set) != SGE_STATUS_INVALID_ARGUMENT) {
        return 1;
    }
    printf("error: %s\n", sge_last_error());
    return 0;
}
