#include <math.h>
#include <stdio.h>

#include "timerev.h"

int main(void) {
    TrModel *model = NULL;
    const char *json = "{\"type\": \"ou\", \"dim\": 1, \"init\": {\"mean\": [1.0], \"cov\": [[0.5]]}}";
    if (tr_model_from_json(json, &model) != TR_STATUS_OK) {
        fprintf(stderr, "model: %s\n", tr_last_error());
        return 1;
    }
    TrReversal *rev = NULL;
    if (tr_reversal_new(model, 1.0, &rev) != TR_STATUS_OK) {
        fprintf(stderr, "reversal: %s\n", tr_last_error());
        return 1;
    }
    double x = 0.0, b = 0.0;
    uint32_t flags = 0;
    tr_reversed_drift(rev, 0.0, &x, 1, &b, &flags);
    printf("timerev %s: reversed drift at (0, 0) = %.6f (flags %u)\n", tr_version(), b, flags);
    tr_reversal_free(rev);
    tr_model_free(model);
    return fabs(b - 2.0 * exp(-1.0)) < 1e-9 ? 0 : 1;
}
