// Gradient-train a one-parameter rotation without the server ever learning
// the circuit: every expectation value is evaluated through a blind
// delegation. <Z> = cos(theta) descends to the ground state at theta = pi.

#include <cstdio>

#include "bvqa/rng.hpp"
#include "bvqa/vqa.hpp"

int main() {
    using namespace bvqa;

    SourceCircuit src(1);
    src.rot(0, 'x', 0);

    VqaConfig cfg;
    cfg.theta = {0.1};
    cfg.eta = 0.4;
    cfg.iterations = 40;

    BlindEvaluator server;  // exact expectations via the delegation protocol
    Rng rng(7);
    for (const TrainRecord& rec : train(cfg, src, server, rng)) {
        if (rec.iteration % 8 == 0 || rec.iteration == cfg.iterations - 1) {
            std::printf("iter %3d  theta % .4f  cost % .6f\n", rec.iteration,
                        rec.theta[0], rec.cost);
        }
    }
    return 0;
}
