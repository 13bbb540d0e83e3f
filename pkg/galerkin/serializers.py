from rest_framework import serializers


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare"""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)


class ModelParamsSerializer(StrictSerializer):
    """Raw Heston parameters; invariants are checked by the params module, not here"""
    r = serializers.FloatField()
    q = serializers.FloatField(default=0.0)
    kappa = serializers.FloatField()
    theta = serializers.FloatField()
    sigma = serializers.FloatField()
    rho = serializers.FloatField()
    K = serializers.FloatField()
    T = serializers.FloatField()

    def get_fields(self):
        fields = super().get_fields()
        # 'lambda' is a keyword, so it cannot be declared in the class body
        fields['lambda'] = serializers.FloatField(default=0.0)
        return fields


class WeightSerializer(StrictSerializer):
    gamma = serializers.FloatField(required=False)
    beta = serializers.FloatField(required=False)

    def validate_gamma(self, value):
        if value <= 0:
            raise serializers.ValidationError("gamma must be positive")
        return value


class PayoffSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=['call', 'put'], default='put')


class BasisSerializer(StrictSerializer):
    mMax = serializers.IntegerField(min_value=0, max_value=64)
    nMax = serializers.IntegerField(min_value=0, max_value=64)
    xScale = serializers.FloatField(required=False)
    xiScale = serializers.FloatField(required=False)
    autoScale = serializers.BooleanField(default=True)

    def validate(self, attrs):
        for key in ('xScale', 'xiScale'):
            if key in attrs and attrs[key] <= 0:
                raise serializers.ValidationError({key: ["Dilation must be positive"]})
        return attrs


class GridSerializer(StrictSerializer):
    pointsPerPanel = serializers.IntegerField(min_value=4, max_value=64, required=False)
    xPanels = serializers.IntegerField(min_value=1, required=False)
    xTailPanels = serializers.IntegerField(min_value=1, required=False)
    xiPanels = serializers.IntegerField(min_value=1, required=False)
    xiGrading = serializers.FloatField(min_value=0.05, max_value=0.95, required=False)
    tailMass = serializers.FloatField(min_value=1e-300, max_value=1e-3, required=False)


class SolveSerializer(StrictSerializer):
    dt = serializers.FloatField()
    tEnd = serializers.FloatField(required=False)
    thetaScheme = serializers.FloatField(min_value=0.5, max_value=1.0, default=1.0)

    def validate(self, attrs):
        if attrs['dt'] <= 0:
            raise serializers.ValidationError({'dt': ["dt must be positive"]})
        if 'tEnd' in attrs and attrs['tEnd'] < attrs['dt']:
            raise serializers.ValidationError({'tEnd': ["tEnd must be at least dt"]})
        return attrs


class ShiftRunSerializer(StrictSerializer):
    y = serializers.FloatField(default=0.0)
    omega = serializers.FloatField(default=0.0)
    omegaStarRe = serializers.FloatField(default=0.0)
    omegaStarIm = serializers.FloatField(default=0.0)


class ShiftSerializer(StrictSerializer):
    radius = serializers.FloatField(required=False)
    runs = ShiftRunSerializer(many=True, required=False)


class PathRunSerializer(StrictSerializer):
    y0 = serializers.FloatField(default=0.0)
    omega0 = serializers.FloatField(default=0.0)
    phi = serializers.FloatField(default=0.0)


class GammaPointSerializer(StrictSerializer):
    y = serializers.FloatField(default=0.0)
    omega = serializers.FloatField(default=0.0)
    tau = serializers.FloatField(default=0.0)


class PathSerializer(StrictSerializer):
    kappa0 = serializers.FloatField(default=0.1)
    nu0 = serializers.FloatField(default=10.0)
    TPrime = serializers.FloatField(default=0.25)
    alpha = serializers.FloatField(default=0.5)
    integrateByParts = serializers.BooleanField(default=False)
    runs = PathRunSerializer(many=True, required=False)
    gammaPoints = GammaPointSerializer(many=True, required=False)


class PricingSerializer(StrictSerializer):
    S0 = serializers.FloatField(required=False)
    v0 = serializers.FloatField(required=False)
    times = serializers.ListField(child=serializers.FloatField(), default=list)
    tolerance = serializers.FloatField(min_value=0.0, default=0.0)
    relTolerance = serializers.FloatField(min_value=0.0, default=0.02)


class OracleSerializer(StrictSerializer):
    paths = serializers.IntegerField(min_value=1, default=100_000)
    steps = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, default=0)
    antithetic = serializers.BooleanField(default=False)
    workers = serializers.IntegerField(min_value=1, required=False)
    dumpPaths = serializers.BooleanField(default=False)


class CheckSerializer(StrictSerializer):
    trials = serializers.IntegerField(min_value=1, default=500)
    seed = serializers.IntegerField(min_value=0, default=0)
    omegas = serializers.ListField(child=serializers.FloatField(), default=list)
    exportMatrices = serializers.BooleanField(default=False)
    weakResidual = serializers.BooleanField(default=True)


class RunConfigSerializer(StrictSerializer):
    """Serializer for the JSON run configuration of the heston command"""
    model = ModelParamsSerializer()
    weight = WeightSerializer(required=False)
    payoff = PayoffSerializer(required=False)
    basis = BasisSerializer(required=False)
    grid = GridSerializer(required=False)
    solve = SolveSerializer(required=False)
    shift = ShiftSerializer(required=False)
    path = PathSerializer(required=False)
    pricing = PricingSerializer(required=False)
    oracle = OracleSerializer(required=False)
    check = CheckSerializer(required=False)
    outputDir = serializers.CharField(required=False)


def validated_config(data) -> dict:
    """Validate a parsed config; raises rest_framework ValidationError"""
    serializer = RunConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.validated_data


# Report serializers

class CheckItemSerializer(serializers.Serializer):
    rule = serializers.CharField()
    description = serializers.CharField()
    slack = serializers.FloatField()
    passed = serializers.BooleanField()


class AdmissibilityReportSerializer(serializers.Serializer):
    """Serializer for params.AdmissibilityReport"""
    admissible = serializers.BooleanField()
    gamma = serializers.FloatField()
    checks = CheckItemSerializer(many=True)
    kappaThreshold = serializers.FloatField(source='kappa_threshold')
    betaMax = serializers.FloatField(source='beta_max')
    fellerRatio = serializers.FloatField(source='params.feller_ratio')
    weight = serializers.SerializerMethodField()
    constants = serializers.SerializerMethodField()
    violations = serializers.ListField(child=serializers.DictField())

    def get_weight(self, obj):
        if obj.weight is None:
            return None
        return {'beta': obj.weight.beta, 'gamma': obj.weight.gamma, 'mu': obj.weight.mu}

    def get_constants(self, obj):
        if obj.constants is None:
            return None
        c = obj.constants
        return {'c1': c.c1, 'c2': c.c2, 'c3': c.c3, 'c1Prime': c.c1_prime, 'c2Prime': c.c2_prime, 'M1': c.M1}


class InequalityReportSerializer(serializers.Serializer):
    name = serializers.CharField()
    lhs = serializers.FloatField()
    rhs = serializers.FloatField()
    passed = serializers.BooleanField()
    tol = serializers.FloatField()
    constants = serializers.DictField(child=serializers.FloatField())
    L0 = serializers.FloatField(allow_null=True)
    LInfinity = serializers.FloatField(source='L_infinity', allow_null=True)
    Lx = serializers.FloatField(source='L_x', allow_null=True)


class CertReportSerializer(serializers.Serializer):
    name = serializers.CharField()
    passed = serializers.BooleanField()
    trials = serializers.IntegerField()
    worstSlack = serializers.FloatField(source='worst_slack')
    worstRelativeSlack = serializers.FloatField(source='worst_relative_slack')
    empiricalConstant = serializers.FloatField(source='empirical_constant', allow_null=True)
    constants = serializers.DictField(child=serializers.FloatField())
    sweep = serializers.ListField(child=serializers.DictField())


class TrajectorySummarySerializer(serializers.Serializer):
    label = serializers.CharField()
    passed = serializers.BooleanField()
    steps = serializers.SerializerMethodField()
    finalNorm = serializers.SerializerMethodField()
    worstRelativeSlack = serializers.FloatField(source='worst_relative_slack')
    growthRate = serializers.FloatField(source='growth_rate')
    growthLimit = serializers.FloatField(source='growth_limit')
    rejectedSteps = serializers.ListField(source='rejected_steps', child=serializers.IntegerField())

    def get_steps(self, obj):
        return len(obj.times) - 1

    def get_finalNorm(self, obj):
        return obj.h_norms[-1]


class McEstimateSerializer(serializers.Serializer):
    price = serializers.FloatField()
    stdError = serializers.FloatField(source='std_error')
    paths = serializers.IntegerField()
    samples = serializers.IntegerField()


class CompletenessEntrySerializer(serializers.Serializer):
    tau = serializers.FloatField()
    minDuDxi = serializers.FloatField(source='min_du_dxi')
    minAbsDuDxi = serializers.FloatField(source='min_abs_du_dxi')
    positiveFraction = serializers.FloatField(source='positive_fraction')
    negativeFraction = serializers.FloatField(source='negative_fraction')
    unresolvedFraction = serializers.FloatField(source='unresolved_fraction')
    zeroSetFraction = serializers.FloatField(source='zero_set_fraction')
    degenerate = serializers.BooleanField()
    passed = serializers.BooleanField()
