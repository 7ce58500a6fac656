# only here to make this directory a package
