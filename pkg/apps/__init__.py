# Apps do Semplan
