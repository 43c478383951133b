#include <math.h>
#include <stdio.h>
#include "fbound.h"

int main(void) {
    FbMarket m = {0.1, 0.05, 10.0, 1.0, 0.2};
    FbBoundary *b = NULL;
    if (fb_solve_integral(&m, 100, &b) != FB_STATUS_OK) {
        fprintf(stderr, "solve failed: %s\n", fb_last_error());
        return 1;
    }
    size_t n = fb_boundary_len(b);
    double rho = 0.0, price = 0.0;
    if (fb_boundary_rho_at(b, 1.0, &rho) != FB_STATUS_OK) return 2;
    if (fb_boundary_price(b, 20.0, &price) != FB_STATUS_OK) return 3;
    fb_boundary_free(b);

    FbMarket bad = {0.05, 0.06, 10.0, 1.0, 0.2};
    FbStatus s = fb_solve_integral(&bad, 100, &b);
    if (s != FB_STATUS_INVALID_ARGUMENT || fb_last_error() == NULL) return 4;

    printf("%zu %.4f %.4f %s\n", n, rho, price, fb_version());
    return fabs(rho - 22.376) < 0.01 && fabs(price - 10.03) < 0.01 ? 0 : 5;
}
