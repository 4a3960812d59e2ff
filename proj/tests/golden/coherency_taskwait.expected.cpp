void bump(int& v) {
    v += 1;
}

void g(int& var) {
    #pragma omp taskgroup
    {
    #pragma omp task depend(inout:var) default(shared)
    {
        bump(var);
    }
    #pragma omp taskwait
    var += 1;
    }
}
