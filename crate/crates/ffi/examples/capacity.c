#include <stdio.h>
#include "wiretap_outage.h"

int main(void) {
    const char *law =
        "{\"kind\":\"continuous\","
        "\"marginal_m\":{\"family\":\"exponential\",\"mean\":2.0},"
        "\"marginal_e\":{\"family\":\"exponential\",\"mean\":1.0}}";
    WoDistribution *dist = NULL;
    WoSolution *sol = NULL;
    WoCapacitySummary s;
    double bound;

    if (wo_distribution_from_json(law, &dist) != WO_STATUS_OK) {
        fprintf(stderr, "%s\n", wo_last_error_message());
        return 1;
    }
    if (wo_solve_capacity(dist, 1.0, 0.02, WO_CSI_FULL, &sol) != WO_STATUS_OK) {
        fprintf(stderr, "%s\n", wo_last_error_message());
        wo_distribution_free(dist);
        return 1;
    }
    wo_solution_summary(sol, &s);
    printf("capacity %.6f lambda %.6f var_rs %.6f\n", s.capacity, s.lambda, s.var_rs);
    if (wo_buffer_bound(s.capacity, 0.02, 0.03, s.var_rs, &bound) == WO_STATUS_OK) {
        printf("buffer bound at 0.03: %.3f\n", bound);
    }
    wo_solution_free(sol);
    wo_distribution_free(dist);
    return 0;
}
